// Command-line front end. Links only the public C API.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "fragal.h"

namespace {

const char* category_of(int code) {
  switch (code) {
    case FRAGAL_ERR_INVALID_ARGUMENT:
      return "invalid-config";
    case FRAGAL_ERR_IO:
      return "io";
    case FRAGAL_ERR_SINGULAR:
      return "singular";
    case FRAGAL_ERR_DEGENERATE:
      return "degenerate";
    default:
      return "runtime";
  }
}

int fail(int code) {
  std::fprintf(stderr, "error: [%s] %s\n", category_of(code),
               fragal_last_error());
  return code;
}

// --out is rebased under FRAGAL_OUT_ROOT when that is set and the path is
// relative. The environment override applies to output locations only.
std::string resolve_out(const std::string& out) {
  const char* root = std::getenv("FRAGAL_OUT_ROOT");
  if (!root || !*root || out.empty() || out.front() == '/') return out;
  std::string r(root);
  if (r.back() != '/') r += '/';
  return r + out;
}

struct ConfigHandle {
  fragal_config* ptr = nullptr;
  ~ConfigHandle() { fragal_config_free(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fragal: importance-sampling active learning for fragility "
               "curve estimation"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;

  auto add_common = [&](CLI::App* cmd, bool need_config) {
    auto* c = cmd->add_option("--config", config_path,
                              "study configuration (JSON)");
    if (need_config) c->required();
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option("--seed", seed, "base seed (overrides config seed)")
        ->each([&](const std::string&) { seed_given = true; });
    cmd->add_option("--threads", threads, "worker threads (default 1)");
  };

  CLI::App* gen = app.add_subcommand("gen-pool",
                                     "generate the oscillator signal pool");
  add_common(gen, true);
  CLI::App* run = app.add_subcommand("run-study", "run the configured study");
  add_common(run, true);
  CLI::App* rep = app.add_subcommand(
      "report", "build figure data + summary for a completed study");
  add_common(rep, false);

  CLI11_PARSE(app, argc, argv);

  if (rep->parsed()) {
    const int rc = fragal_report(resolve_out(out_dir).c_str());
    return rc == FRAGAL_OK ? 0 : fail(rc);
  }

  ConfigHandle cfg;
  int rc = fragal_config_load(config_path.c_str(), &cfg.ptr);
  if (rc != FRAGAL_OK) return fail(rc);
  rc = fragal_config_validate(cfg.ptr);
  if (rc != FRAGAL_OK) return fail(rc);
  if (!seed_given) {
    rc = fragal_config_get_seed(cfg.ptr, &seed);
    if (rc != FRAGAL_OK) return fail(rc);
  }

  const std::string out = resolve_out(out_dir);
  if (gen->parsed())
    rc = fragal_gen_pool(cfg.ptr, out.c_str(), seed, threads);
  else
    rc = fragal_run_study(cfg.ptr, out.c_str(), seed, threads);
  return rc == FRAGAL_OK ? 0 : fail(rc);
}
