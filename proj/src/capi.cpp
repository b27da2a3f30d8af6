#include "fragal.h"

#include <cstring>
#include <string>

#include "fragal/benchlab.hpp"
#include "fragal/inference.hpp"
#include "fragal/study.hpp"
#include "fragal/version.hpp"

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const fragal::inference::SingularHessianError*>(&e))
    return FRAGAL_ERR_SINGULAR;
  if (dynamic_cast<const fragal::benchlab::TooManyDegenerateError*>(&e))
    return FRAGAL_ERR_DEGENERATE;
  if (dynamic_cast<const std::invalid_argument*>(&e) ||
      dynamic_cast<const std::domain_error*>(&e))
    return FRAGAL_ERR_INVALID_ARGUMENT;
  const std::string what = e.what();
  if (what.find("cannot read") != std::string::npos ||
      what.find("cannot write") != std::string::npos ||
      what.find("cannot open") != std::string::npos ||
      what.find("missing artifacts") != std::string::npos)
    return FRAGAL_ERR_IO;
  return FRAGAL_ERR_RUNTIME;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return FRAGAL_OK;
  } catch (const std::exception& e) {
    return set_error(classify(e), e.what());
  } catch (...) {
    return set_error(FRAGAL_ERR_RUNTIME, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

unsigned thread_count(int threads) {
  return threads <= 0 ? 1u : static_cast<unsigned>(threads);
}

}  // namespace

struct fragal_config {
  fragal::study::StudyConfig cfg;
};

extern "C" {

const char* fragal_version(void) { return fragal::kVersion; }

const char* fragal_last_error(void) { return g_last_error.c_str(); }

void fragal_string_free(char* s) { delete[] s; }

int fragal_config_load(const char* path, fragal_config** out) {
  if (!path || !out)
    return set_error(FRAGAL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new fragal_config{fragal::study::StudyConfig::load_file(path)};
  });
}

int fragal_config_from_json(const char* json_text, fragal_config** out) {
  if (!json_text || !out)
    return set_error(FRAGAL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new fragal_config{
        fragal::study::StudyConfig::from_json_string(json_text)};
  });
}

int fragal_config_preset(const char* name, fragal_config** out) {
  if (!name || !out)
    return set_error(FRAGAL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new fragal_config{fragal::study::StudyConfig::preset(name)};
  });
}

int fragal_preset_names(char** out_text) {
  if (!out_text)
    return set_error(FRAGAL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    std::string all;
    for (const auto& n : fragal::study::StudyConfig::preset_names())
      all += n + "\n";
    *out_text = dup_string(all);
  });
}

int fragal_config_to_json(const fragal_config* cfg, char** out_text) {
  if (!cfg || !out_text)
    return set_error(FRAGAL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *out_text = dup_string(cfg->cfg.to_json_string()); });
}

int fragal_config_validate(const fragal_config* cfg) {
  if (!cfg) return set_error(FRAGAL_ERR_INVALID_ARGUMENT, "null config");
  return guarded([&] { cfg->cfg.validate(); });
}

int fragal_config_get_seed(const fragal_config* cfg, uint64_t* out) {
  if (!cfg || !out)
    return set_error(FRAGAL_ERR_INVALID_ARGUMENT, "null argument");
  *out = cfg->cfg.seed;
  return FRAGAL_OK;
}

void fragal_config_free(fragal_config* cfg) { delete cfg; }

int fragal_gen_pool(const fragal_config* cfg, const char* out_dir,
                    uint64_t seed, int threads) {
  if (!cfg || !out_dir)
    return set_error(FRAGAL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    fragal::study::gen_pool(cfg->cfg, out_dir, seed, thread_count(threads));
  });
}

int fragal_run_study(const fragal_config* cfg, const char* out_dir,
                     uint64_t seed, int threads) {
  if (!cfg || !out_dir)
    return set_error(FRAGAL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    fragal::study::run_study(cfg->cfg, out_dir, seed, thread_count(threads));
  });
}

int fragal_report(const char* study_dir) {
  if (!study_dir)
    return set_error(FRAGAL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { fragal::study::report(study_dir); });
}

int fragal_fragility_prob(double alpha, double beta, double log_im,
                          double* out) {
  if (!out || !(alpha > 0.0) || !(beta > 0.0))
    return set_error(FRAGAL_ERR_INVALID_ARGUMENT,
                     "fragility_prob: need alpha > 0, beta > 0");
  *out = fragal::model::fragility_prob({alpha, beta}, log_im);
  return FRAGAL_OK;
}

int fragal_chi2_quantile(int dof, double prob, double* out) {
  if (!out) return set_error(FRAGAL_ERR_INVALID_ARGUMENT, "null out");
  return guarded([&] { *out = fragal::chi2_quantile(dof, prob); });
}

}  // extern "C"
