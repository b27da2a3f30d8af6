#include "study.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fragal::study {

namespace {

// ---------------------------------------------------------------------------
// Formatting / small IO helpers
// ---------------------------------------------------------------------------

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("short write " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      if (tab == std::string::npos) {
        cells.push_back(line.substr(pos));
        break;
      }
      cells.push_back(line.substr(pos, tab - pos));
      pos = tab + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Config serialization
// ---------------------------------------------------------------------------

json im_to_json(const ImChoice& im) {
  json j;
  j["kind"] = (im.kind == ImChoice::Kind::kPga) ? "pga" : "sa";
  j["sa_freq_hz"] = im.sa_freq_hz;
  j["sa_zeta"] = im.sa_zeta;
  return j;
}

ImChoice im_from_json(const json& j, const ImChoice& base) {
  ImChoice im = base;
  if (j.contains("kind")) {
    const std::string k = j.at("kind").get<std::string>();
    if (k == "pga")
      im.kind = ImChoice::Kind::kPga;
    else if (k == "sa")
      im.kind = ImChoice::Kind::kSa;
    else
      throw std::invalid_argument("config: im.kind must be pga or sa");
  }
  if (j.contains("sa_freq_hz")) im.sa_freq_hz = j.at("sa_freq_hz").get<double>();
  if (j.contains("sa_zeta")) im.sa_zeta = j.at("sa_zeta").get<double>();
  return im;
}

template <class T>
void maybe(const json& j, const char* key, T& slot) {
  if (j.contains(key)) slot = j.at(key).get<T>();
}

}  // namespace

void StudyConfig::validate() const {
  auto fail = [](const std::string& m) {
    throw std::invalid_argument("config: " + m);
  };
  if (case_name != "synthetic" && case_name != "oscillator")
    fail("case must be synthetic or oscillator");
  if (n0 < 1 || n < n0) fail("need n >= n0 >= 1");
  if (replications < 1) fail("replications must be >= 1");
  std::vector<double> eps = epsilon_sweep.empty()
                                ? std::vector<double>{epsilon}
                                : epsilon_sweep;
  for (double e : eps)
    if (!(e > 0.0 && e <= 1.0)) fail("epsilon must lie in (0, 1]");
  if (!(xi > 0.0 && xi < 1.0)) fail("xi must lie in (0, 1)");
  if (beta_reg_grid.empty()) fail("beta_reg_grid must be nonempty");
  for (double b : beta_reg_grid)
    if (!(b >= 0.0)) fail("beta_reg values must be nonnegative");
  if (!(bounds.alpha_lo > 0.0 && bounds.alpha_lo < bounds.alpha_hi))
    fail("alpha bounds must satisfy 0 < lo < hi");
  if (!(bounds.beta_lo > 0.0 && bounds.beta_lo < bounds.beta_hi))
    fail("beta bounds must satisfy 0 < lo < hi");
  if (pool_size == 0) fail("pool_size must be positive");
  if (test_size == 0) fail("test_size must be positive");
  for (const std::string& s : strategies)
    if (s != "isal" && s != "rs" && s != "mle")
      fail("unknown strategy '" + s + "'");
  if (strategies.empty()) fail("strategies must be nonempty");
  if (case_name == "oscillator") {
    if (capacity_mode != "fixed2y" && capacity_mode != "quantile")
      fail("capacity_mode must be fixed2y or quantile");
    if (!(capacity_quantile > 0.0 && capacity_quantile < 1.0))
      fail("capacity_quantile must lie in (0,1)");
    const auto& o = oscillator;
    if (!(o.freq_hz > 0.0 && o.zeta > 0.0 && o.zeta < 1.0 &&
          o.yield_disp > 0.0 && o.hardening_ratio >= 0.0 &&
          o.hardening_ratio <= 1.0))
      fail("invalid oscillator spec");
    const auto& g = ground_motion;
    if (!(g.dt > 0.0 && g.duration_s > 0.0 && g.env_peak_s > 0.0 &&
          g.env_shape >= 1.0 && g.filter_freq_hz > 0.0 &&
          g.filter_damping > 0.0 && g.filter_damping < 1.0 &&
          g.scale >= 0.0 && g.amp_log_sd >= 0.0))
      fail("invalid ground motion parameters");
  }
  for (std::size_t m : eval_sizes)
    if (m < 1 || m > n) fail("eval_sizes entries must lie in [1, n]");
  for (std::size_t m : inference_sizes)
    if (m < 1 || m > n) fail("inference_sizes entries must lie in [1, n]");
}

std::string StudyConfig::to_json_string() const {
  json j;
  j["case"] = case_name;
  j["im"] = im_to_json(im);
  j["n"] = n;
  j["n0"] = n0;
  j["replications"] = replications;
  j["epsilon"] = epsilon;
  j["epsilon_sweep"] = epsilon_sweep;
  j["beta_reg_grid"] = beta_reg_grid;
  j["xi"] = xi;
  j["bounds"] = {{"alpha_lo", bounds.alpha_lo},
                 {"alpha_hi", bounds.alpha_hi},
                 {"beta_lo", bounds.beta_lo},
                 {"beta_hi", bounds.beta_hi}};
  j["pool_size"] = pool_size;
  j["test_size"] = test_size;
  j["seed"] = seed;
  j["eval_sizes"] = eval_sizes;
  j["inference_sizes"] = inference_sizes;
  j["wn_pairs"] = wn_pairs;
  j["bootstrap_b"] = bootstrap_b;
  j["strategies"] = strategies;
  j["synthetic"] = {{"alpha_star", alpha_star},
                    {"beta_star", beta_star},
                    {"x_mean", x_mean},
                    {"x_var", x_var}};
  j["oscillator"] = {{"freq_hz", oscillator.freq_hz},
                     {"zeta", oscillator.zeta},
                     {"yield_disp", oscillator.yield_disp},
                     {"hardening_ratio", oscillator.hardening_ratio},
                     {"capacity_mode", capacity_mode},
                     {"capacity_quantile", capacity_quantile}};
  j["ground_motion"] = {{"filter_freq_hz", ground_motion.filter_freq_hz},
                        {"filter_damping", ground_motion.filter_damping},
                        {"env_shape", ground_motion.env_shape},
                        {"env_peak_s", ground_motion.env_peak_s},
                        {"duration_s", ground_motion.duration_s},
                        {"dt", ground_motion.dt},
                        {"scale", ground_motion.scale},
                        {"amp_log_sd", ground_motion.amp_log_sd}};
  j["pool_dir"] = pool_dir;
  j["kmeans_clusters"] = kmeans_clusters;
  j["ci_draws"] = ci_draws;
  return j.dump(2) + "\n";
}

StudyConfig StudyConfig::from_json_string(const std::string& text) {
  json j = json::parse(text);
  StudyConfig c;
  if (j.contains("preset"))
    c = preset(j.at("preset").get<std::string>());
  maybe(j, "case", c.case_name);
  if (j.contains("im")) c.im = im_from_json(j.at("im"), c.im);
  maybe(j, "n", c.n);
  maybe(j, "n0", c.n0);
  maybe(j, "replications", c.replications);
  maybe(j, "epsilon", c.epsilon);
  maybe(j, "epsilon_sweep", c.epsilon_sweep);
  maybe(j, "beta_reg_grid", c.beta_reg_grid);
  maybe(j, "xi", c.xi);
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    maybe(b, "alpha_lo", c.bounds.alpha_lo);
    maybe(b, "alpha_hi", c.bounds.alpha_hi);
    maybe(b, "beta_lo", c.bounds.beta_lo);
    maybe(b, "beta_hi", c.bounds.beta_hi);
  }
  maybe(j, "pool_size", c.pool_size);
  maybe(j, "test_size", c.test_size);
  maybe(j, "seed", c.seed);
  maybe(j, "eval_sizes", c.eval_sizes);
  maybe(j, "inference_sizes", c.inference_sizes);
  maybe(j, "wn_pairs", c.wn_pairs);
  maybe(j, "bootstrap_b", c.bootstrap_b);
  maybe(j, "strategies", c.strategies);
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    maybe(s, "alpha_star", c.alpha_star);
    maybe(s, "beta_star", c.beta_star);
    maybe(s, "x_mean", c.x_mean);
    maybe(s, "x_var", c.x_var);
  }
  if (j.contains("oscillator")) {
    const json& o = j.at("oscillator");
    maybe(o, "freq_hz", c.oscillator.freq_hz);
    maybe(o, "zeta", c.oscillator.zeta);
    maybe(o, "yield_disp", c.oscillator.yield_disp);
    maybe(o, "hardening_ratio", c.oscillator.hardening_ratio);
    maybe(o, "capacity_mode", c.capacity_mode);
    maybe(o, "capacity_quantile", c.capacity_quantile);
  }
  if (j.contains("ground_motion")) {
    const json& g = j.at("ground_motion");
    maybe(g, "filter_freq_hz", c.ground_motion.filter_freq_hz);
    maybe(g, "filter_damping", c.ground_motion.filter_damping);
    maybe(g, "env_shape", c.ground_motion.env_shape);
    maybe(g, "env_peak_s", c.ground_motion.env_peak_s);
    maybe(g, "duration_s", c.ground_motion.duration_s);
    maybe(g, "dt", c.ground_motion.dt);
    maybe(g, "scale", c.ground_motion.scale);
    maybe(g, "amp_log_sd", c.ground_motion.amp_log_sd);
  }
  maybe(j, "pool_dir", c.pool_dir);
  maybe(j, "kmeans_clusters", c.kmeans_clusters);
  maybe(j, "ci_draws", c.ci_draws);
  return c;
}

StudyConfig StudyConfig::load_file(const std::string& path) {
  return from_json_string(read_text_file(path));
}

StudyConfig StudyConfig::preset(const std::string& name) {
  StudyConfig c;
  if (name == "synthetic-paper") {
    c.case_name = "synthetic";
    c.alpha_star = 0.3;
    c.beta_star = 0.4;
    c.x_mean = std::log(0.3 / 5.0);
    c.x_var = 1.69;
    c.n = 120;
    c.n0 = 20;
    c.replications = 200;
    c.epsilon = 1e-3;
    c.xi = 0.9;
    c.pool_size = 10000;
    c.test_size = 10000;
    c.eval_sizes = {20, 40, 60, 80, 100, 120};
    c.inference_sizes = {120};
    c.bootstrap_b = 0;
    return c;
  }
  if (name == "oscillator-paper" || name == "oscillator-epsilon-sweep") {
    c.case_name = "oscillator";
    c.im.kind = ImChoice::Kind::kPga;
    c.oscillator = {5.0, 0.02, 5e-3, 0.2};
    c.capacity_mode = "fixed2y";
    c.ground_motion = {5.0, 0.6, 3.0, 4.0, 20.0, 0.005, 0.2, 1.3};
    c.n = 120;
    c.n0 = 20;
    c.replications = 50;
    c.epsilon = 1e-3;
    c.xi = 0.9;
    c.pool_size = 10000;
    c.test_size = 10000;
    c.eval_sizes = {20, 40, 60, 80, 100, 120};
    c.inference_sizes = {120};
    c.bootstrap_b = 200;
    if (name == "oscillator-epsilon-sweep") {
      c.epsilon_sweep = {1e-1, 1e-2, 1e-3};
      c.bootstrap_b = 0;
      c.strategies = {"isal", "rs"};
    }
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

std::vector<std::string> StudyConfig::preset_names() {
  return {"synthetic-paper", "oscillator-paper", "oscillator-epsilon-sweep"};
}

// ---------------------------------------------------------------------------
// Pool generation
// ---------------------------------------------------------------------------

namespace {

enum PoolStream : std::uint64_t {
  kStreamPoolSignal = 101,
  kStreamTestSignal = 102,
};

struct SignalRecord {
  std::string path;
  double pga = 0.0;
  double sa = 0.0;
  double d_lin = 0.0;
  double d_nl = std::numeric_limits<double>::quiet_NaN();
};

SignalRecord make_signal(const StudyConfig& cfg, const fs::path& dir,
                         const std::string& stem, std::uint64_t seed,
                         bool with_nonlinear) {
  Rng rng(seed);
  const dynamics::Accelerogram raw =
      dynamics::generate_signal(cfg.ground_motion, rng);
  SignalRecord rec;
  rec.path = "signals/" + stem + ".sig";
  dynamics::write_accelerogram((dir / rec.path).string(), raw);
  // IMs and responses are computed from the quantized stored signal so that
  // everything downstream agrees with the files on disk.
  const dynamics::Accelerogram acc =
      dynamics::read_accelerogram((dir / rec.path).string());
  rec.pga = dynamics::pga(acc);
  rec.sa = dynamics::spectral_accel(acc, cfg.im.sa_freq_hz, cfg.im.sa_zeta);
  rec.d_lin = dynamics::simulate_linear(acc, cfg.oscillator).max_disp;
  if (with_nonlinear)
    rec.d_nl = dynamics::simulate_nonlinear(acc, cfg.oscillator).max_disp;
  return rec;
}

std::string manifest_header(bool with_nonlinear) {
  return with_nonlinear ? "index\tpath\tpga\tsa\td_lin\td_nl\n"
                        : "index\tpath\tpga\tsa\td_lin\n";
}

std::string manifest_row(std::size_t i, const SignalRecord& r,
                         bool with_nonlinear) {
  std::string row = std::to_string(i) + "\t" + r.path + "\t" + fmt(r.pga) +
                    "\t" + fmt(r.sa) + "\t" + fmt(r.d_lin);
  if (with_nonlinear) row += "\t" + fmt(r.d_nl);
  return row + "\n";
}

}  // namespace

void gen_pool(const StudyConfig& config, const std::string& out_dir,
              std::uint64_t seed, unsigned threads) {
  config.validate();
  if (config.case_name != "oscillator")
    throw std::invalid_argument(
        "gen-pool applies to the oscillator case only (the synthetic case "
        "needs no signals)");
  const fs::path dir(out_dir);
  fs::create_directories(dir / "signals");

  std::vector<SignalRecord> pool(config.pool_size);
  benchlab::parallel_for(config.pool_size, threads, [&](std::size_t i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "pool_%06zu", i);
    pool[i] = make_signal(config, dir, stem,
                          derive_seed(seed, kStreamPoolSignal, i), false);
  });

  std::vector<SignalRecord> test(config.test_size);
  benchlab::parallel_for(config.test_size, threads, [&](std::size_t i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "test_%06zu", i);
    test[i] = make_signal(config, dir, stem,
                          derive_seed(seed, kStreamTestSignal, i), true);
  });

  std::string pm = manifest_header(false);
  for (std::size_t i = 0; i < pool.size(); ++i)
    pm += manifest_row(i, pool[i], false);
  write_text_file(dir / "pool_manifest.tsv", pm);

  std::string tm = manifest_header(true);
  for (std::size_t i = 0; i < test.size(); ++i)
    tm += manifest_row(i, test[i], true);
  write_text_file(dir / "test_manifest.tsv", tm);

  json info;
  info["version"] = kVersion;
  info["seed"] = seed;
  info["pool_size"] = config.pool_size;
  info["test_size"] = config.test_size;
  info["ground_motion"] = json::parse(config.to_json_string())["ground_motion"];
  if (!pool.empty()) {
    std::vector<double> dl;
    dl.reserve(pool.size());
    for (const auto& r : pool) dl.push_back(r.d_lin);
    info["d_lin_q90"] = quantile_type7(dl, 0.9);
    info["capacity_2y"] = 2.0 * config.oscillator.yield_disp;
  }
  write_text_file(dir / "pool_info.json", info.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Oscillator case assembly
// ---------------------------------------------------------------------------

namespace {

std::vector<SignalRecord> load_manifest(const fs::path& file,
                                        bool with_nonlinear) {
  const auto rows = read_tsv(file);
  if (rows.empty()) throw std::runtime_error("empty manifest " + file.string());
  std::vector<SignalRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < (with_nonlinear ? 6u : 5u))
      throw std::runtime_error("bad manifest row in " + file.string());
    SignalRecord rec;
    rec.path = row[1];
    rec.pga = std::stod(row[2]);
    rec.sa = std::stod(row[3]);
    rec.d_lin = std::stod(row[4]);
    if (with_nonlinear) rec.d_nl = std::stod(row[5]);
    out.push_back(std::move(rec));
  }
  return out;
}

double im_of(const SignalRecord& r, const ImChoice& im) {
  return (im.kind == ImChoice::Kind::kPga) ? r.pga : r.sa;
}

}  // namespace

benchlab::CaseContext build_oscillator_case(const StudyConfig& config,
                                            const std::string& pool_dir,
                                            unsigned threads,
                                            OscillatorCaseInfo* info) {
  const fs::path dir(pool_dir);
  auto pool = load_manifest(dir / "pool_manifest.tsv", false);
  auto test = load_manifest(dir / "test_manifest.tsv", true);
  if (pool.empty()) throw std::runtime_error("oscillator pool is empty");

  // Nonlinear responses for the pool (the expensive labeling quantity).
  benchlab::parallel_for(pool.size(), threads, [&](std::size_t i) {
    const dynamics::Accelerogram acc =
        dynamics::read_accelerogram((dir / pool[i].path).string());
    pool[i].d_nl = dynamics::simulate_nonlinear(acc, config.oscillator).max_disp;
  });

  std::vector<double> d_lin;
  d_lin.reserve(pool.size());
  for (const auto& r : pool) d_lin.push_back(r.d_lin);
  const double capacity =
      (config.capacity_mode == "fixed2y")
          ? 2.0 * config.oscillator.yield_disp
          : dynamics::capacity_from_quantile(d_lin, config.capacity_quantile);

  benchlab::CaseContext ctx;
  ctx.bounds = config.bounds;
  ctx.marginal = sampling::MarginalModel::pool_empirical();
  ctx.init_mode = benchlab::IsalInitMode::kFixedTheta;
  ctx.beta_reg_grid = config.beta_reg_grid;

  ctx.pool_x.resize(pool.size());
  ctx.pool_labels.resize(pool.size());
  estimators::WeightedDataset full, lin;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const double im = im_of(pool[i], config.im);
    if (!(im > 0.0))
      throw std::runtime_error("nonpositive IM in pool record " +
                               std::to_string(i));
    ctx.pool_x[i] = std::log(im);
    ctx.pool_labels[i] = (pool[i].d_nl > capacity) ? 1 : 0;
    failures += ctx.pool_labels[i];
    full.push(ctx.pool_x[i], ctx.pool_labels[i], 1.0);
    lin.push(ctx.pool_x[i], (pool[i].d_lin > capacity) ? 1 : 0, 1.0);
  }

  ctx.test.x.resize(test.size());
  ctx.test.s.resize(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double im = im_of(test[i], config.im);
    if (!(im > 0.0))
      throw std::runtime_error("nonpositive IM in test record " +
                               std::to_string(i));
    ctx.test.x[i] = std::log(im);
    ctx.test.s[i] = (test[i].d_nl > capacity) ? 1 : 0;
  }

  const model::FragilityParams center{
      std::sqrt(ctx.bounds.alpha_lo * ctx.bounds.alpha_hi),
      std::sqrt(ctx.bounds.beta_lo * ctx.bounds.beta_hi)};
  const model::RegularizerConfig no_reg{0.0};
  const estimators::FitResult ref =
      estimators::minimize_regularized_risk(full, no_reg, ctx.bounds, center);
  const estimators::FitResult surrogate =
      estimators::minimize_regularized_risk(lin, no_reg, ctx.bounds, center);
  ctx.theta_star = ref.theta;
  ctx.fixed_theta0 = surrogate.theta;

  double b = 0.0;
  for (double x : ctx.pool_x)
    b += model::fragility_prob(ref.theta, x) *
         model::fragility_sf(ref.theta, x);
  ctx.b = b / static_cast<double>(ctx.pool_x.size());

  if (info) {
    info->capacity = capacity;
    info->theta_star_ref = ref.theta;
    info->theta0_surrogate = surrogate.theta;
    info->b = ctx.b;
    info->pool_failure_fraction =
        static_cast<double>(failures) / static_cast<double>(pool.size());
    info->d_lin_q90 = dynamics::capacity_from_quantile(d_lin, 0.9);
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Study execution
// ---------------------------------------------------------------------------

namespace {

struct InfRow {
  std::size_t n = 0;
  bool ok = false;
  Mat2 g{};
  double cev = std::numeric_limits<double>::quiet_NaN();
  bool cp_hit = false;
  std::string error;
};

struct RepRecord {
  bool ok = false;
  std::string error;
  model::RegularizerConfig reg{};
  bool loo_degenerate = false;
  std::size_t oracle_calls = 0;
  // per eval size
  struct SizeRow {
    std::size_t n;
    double train, test, alpha, beta;
    bool boundary, all_same;
  };
  std::vector<SizeRow> sizes;
  std::vector<InfRow> inference;        // IS-AL asymptotic packs
  std::vector<InfRow> mle_bootstrap;    // MLE bootstrap covariances
  std::optional<benchlab::IsalRep> isal;  // kept for pairing / draws table
  std::optional<benchlab::MleRep> mle;
};

struct StrategyBatch {
  std::string name;
  std::vector<RepRecord> reps;
};

std::vector<std::size_t> sorted_union(const std::vector<std::size_t>& a,
                                      const std::vector<std::size_t>& b,
                                      std::size_t n_max) {
  std::set<std::size_t> s(a.begin(), a.end());
  s.insert(b.begin(), b.end());
  std::vector<std::size_t> out;
  for (std::size_t v : s)
    if (v >= 1 && v <= n_max) out.push_back(v);
  return out;
}

RepRecord run_traj_rep(const StudyConfig& cfg,
                       const benchlab::CaseContext& ctx, bool isal,
                       double epsilon, std::uint64_t rep_seed) {
  RepRecord rec;
  try {
    benchlab::IsalRep rep =
        isal ? benchlab::run_isal_replication(ctx, cfg.n, cfg.n0, epsilon,
                                              rep_seed)
             : benchlab::run_rs_replication(ctx, cfg.n, cfg.n0, rep_seed);
    rec.reg = rep.reg;
    rec.loo_degenerate = rep.loo_degenerate;
    rec.oracle_calls = rep.oracle_calls_total;
    for (std::size_t m : cfg.eval_sizes) {
      const estimators::FitResult& fit = rep.traj.fits[m];
      rec.sizes.push_back({m, fit.risk_value,
                           benchlab::test_risk(fit.theta, rep.reg, ctx.test),
                           fit.theta.alpha, fit.theta.beta, fit.boundary,
                           fit.all_same_label});
    }
    if (isal) {
      for (std::size_t m : cfg.inference_sizes) {
        InfRow row;
        row.n = m;
        try {
          const inference::CovariancePack pack =
              inference::g_hat(rep.traj, m);
          row.g = pack.g_hat;
          row.cev = benchlab::cev(pack.g_hat, m);
          row.cp_hit = inference::ellipsoid(rep.traj.fits[m].theta, pack,
                                            cfg.xi)
                           .contains(ctx.theta_star);
          row.ok = true;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        rec.inference.push_back(row);
      }
      rec.isal = std::move(rep);
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

RepRecord run_mle_rep(const StudyConfig& cfg, const benchlab::CaseContext& ctx,
                      std::uint64_t rep_seed) {
  RepRecord rec;
  try {
    const std::vector<std::size_t> sizes =
        sorted_union(cfg.eval_sizes, cfg.inference_sizes, cfg.n);
    benchlab::MleRep rep =
        benchlab::run_mle_replication(ctx, cfg.n, cfg.n0, sizes, rep_seed);
    rec.reg = rep.reg;
    rec.loo_degenerate = rep.loo_degenerate;
    rec.oracle_calls = rep.oracle_calls;

    auto fit_at = [&](std::size_t m) -> const estimators::FitResult* {
      for (std::size_t i = 0; i < rep.sizes.size(); ++i)
        if (rep.sizes[i] == m) return &rep.fits[i];
      return nullptr;
    };
    for (std::size_t m : cfg.eval_sizes) {
      const estimators::FitResult* fit = fit_at(m);
      if (!fit) continue;
      estimators::WeightedDataset prefix;
      for (std::size_t i = 0; i < m; ++i)
        prefix.push(rep.data.x[i], rep.data.s[i], 1.0);
      rec.sizes.push_back(
          {m, estimators::regularized_risk(prefix, fit->theta, rep.reg),
           benchlab::test_risk(fit->theta, rep.reg, ctx.test),
           fit->theta.alpha, fit->theta.beta, fit->boundary,
           fit->all_same_label});
    }
    if (cfg.bootstrap_b > 0) {
      Rng boot_rng(derive_seed(rep_seed, 77));
      for (std::size_t m : cfg.inference_sizes) {
        const estimators::FitResult* fit = fit_at(m);
        if (!fit) continue;
        InfRow row;
        row.n = m;
        try {
          estimators::WeightedDataset prefix;
          prefix.provenance = estimators::Provenance::kMle;
          for (std::size_t i = 0; i < m; ++i)
            prefix.push(rep.data.x[i], rep.data.s[i], 1.0);
          const benchlab::BootstrapCov bc = benchlab::bootstrap_mle_cov(
              prefix, cfg.bootstrap_b, ctx.bounds, fit->theta, boot_rng);
          row.g = bc.v_mle;
          row.cev = benchlab::cev(bc.v_mle, m);
          row.cp_hit =
              inference::ellipsoid_from_cov(fit->theta, bc.v_mle, m, cfg.xi)
                  .contains(ctx.theta_star);
          row.ok = true;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        rec.mle_bootstrap.push_back(row);
      }
    }
    rec.mle = std::move(rep);
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

void check_failures(const StrategyBatch& batch) {
  std::size_t failed = 0;
  for (const auto& r : batch.reps) failed += r.ok ? 0 : 1;
  if (failed * 10 > batch.reps.size())
    throw std::runtime_error("strategy " + batch.name + ": " +
                             std::to_string(failed) + "/" +
                             std::to_string(batch.reps.size()) +
                             " replications failed");
}

}  // namespace

void run_study(const StudyConfig& config, const std::string& out_dir,
               std::uint64_t seed, unsigned threads) {
  config.validate();
  const fs::path dir(out_dir);
  fs::create_directories(dir);

  const std::vector<double> eps_list = config.epsilon_sweep.empty()
                                           ? std::vector<double>{config.epsilon}
                                           : config.epsilon_sweep;
  const bool want_isal = std::count(config.strategies.begin(),
                                    config.strategies.end(), "isal") > 0;
  const bool want_rs = std::count(config.strategies.begin(),
                                  config.strategies.end(), "rs") > 0;
  const bool want_mle = std::count(config.strategies.begin(),
                                   config.strategies.end(), "mle") > 0;

  // Case assembly.
  benchlab::CaseContext ctx;
  OscillatorCaseInfo osc_info;
  if (config.case_name == "synthetic") {
    benchlab::SyntheticSpec spec;
    spec.theta_star = {config.alpha_star, config.beta_star};
    spec.x_mean = config.x_mean;
    spec.x_var = config.x_var;
    spec.pool_size = config.pool_size;
    spec.test_size = config.test_size;
    spec.bounds = config.bounds;
    spec.beta_reg_grid = config.beta_reg_grid;
    ctx = benchlab::build_synthetic_case(spec, seed);
  } else {
    if (config.pool_dir.empty())
      throw std::invalid_argument("config: oscillator study needs pool_dir");
    ctx = build_oscillator_case(config, config.pool_dir, threads, &osc_info);
  }

  const std::size_t R = config.replications;

  // Tables accumulate across the epsilon sweep.
  std::string risks = "strategy\tepsilon\trep\tn\ttrain_risk\ttest_risk\talpha"
                      "\tbeta\tboundary\tall_same_label\n";
  std::string metrics =
      "strategy\tepsilon\tn\treps\tmean_train\trsd_train\trb_train\tnu_train"
      "\tmean_test\trsd_test\trb_test\tnu_test\tq10_test\tq90_test\n";
  std::string inf_isal =
      "epsilon\trep\tn\tok\tg11\tg12\tg22\tcev\tcp_hit\terror\n";
  std::string inf_mle = "rep\tn\tok\tv11\tv12\tv22\tcev\tcp_hit\terror\n";
  std::string wn = "epsilon\tpair\tn\tw_n\tthreshold\treject\tok\terror\n";
  std::string combined =
      "epsilon\tpair\tn\talpha_12\tbeta_12\tcev_12\tcp_hit\tok\terror\n";
  std::string draws =
      "epsilon\trep\tstep\tpool_index\tx\tlabel\tweight\talpha_at_draw"
      "\tbeta_at_draw\n";

  json manifest;
  manifest["version"] = kVersion;
  manifest["base_seed"] = seed;
  manifest["replications"] = R;
  json rep_info = json::object();

  bool band_written = false;
  std::string band_tsv, refcurve_tsv;

  for (double eps : eps_list) {
    const std::string eps_s = fmt(eps);

    std::vector<StrategyBatch> batches;
    if (want_isal) batches.push_back({"isal", {}});
    if (want_rs) batches.push_back({"rs", {}});
    if (want_mle) batches.push_back({"mle", {}});

    for (auto& batch : batches) {
      batch.reps.resize(R);
      benchlab::parallel_for(R, threads, [&](std::size_t r) {
        const std::uint64_t rep_seed = seed + r;
        if (batch.name == "isal")
          batch.reps[r] = run_traj_rep(config, ctx, true, eps, rep_seed);
        else if (batch.name == "rs")
          batch.reps[r] = run_traj_rep(config, ctx, false, eps, rep_seed);
        else
          batch.reps[r] = run_mle_rep(config, ctx, rep_seed);
      });
      check_failures(batch);
    }

    // Risk rows + per-size metric aggregation.
    const StrategyBatch* isal_batch = nullptr;
    for (const auto& b : batches)
      if (b.name == "isal") isal_batch = &b;

    for (const auto& batch : batches) {
      for (std::size_t r = 0; r < R; ++r) {
        const RepRecord& rec = batch.reps[r];
        if (!rec.ok) continue;
        for (const auto& row : rec.sizes) {
          risks += batch.name + "\t" + eps_s + "\t" + std::to_string(r) +
                   "\t" + std::to_string(row.n) + "\t" + fmt(row.train) +
                   "\t" + fmt(row.test) + "\t" + fmt(row.alpha) + "\t" +
                   fmt(row.beta) + "\t" + (row.boundary ? "1" : "0") + "\t" +
                   (row.all_same ? "1" : "0") + "\n";
        }
      }
      for (std::size_t m : config.eval_sizes) {
        auto collect = [&](const StrategyBatch& bb, bool train) {
          std::vector<double> v;
          for (const auto& rec : bb.reps) {
            if (!rec.ok) continue;
            for (const auto& row : rec.sizes)
              if (row.n == m) v.push_back(train ? row.train : row.test);
          }
          return v;
        };
        const std::vector<double> train = collect(batch, true);
        const std::vector<double> test = collect(batch, false);
        std::vector<double> isal_train, isal_test;
        if (isal_batch) {
          isal_train = collect(*isal_batch, true);
          isal_test = collect(*isal_batch, false);
        }
        const benchlab::MetricRow mt = benchlab::compute_metrics(
            train, ctx.b, isal_batch ? &isal_train : nullptr);
        const benchlab::MetricRow me = benchlab::compute_metrics(
            test, ctx.b, isal_batch ? &isal_test : nullptr);
        const bool self = isal_batch && (&batch == isal_batch);
        metrics += batch.name + "\t" + eps_s + "\t" + std::to_string(m) +
                   "\t" + std::to_string(mt.reps) + "\t" + fmt(mt.mean) +
                   "\t" + fmt(mt.rsd) + "\t" + fmt(mt.rb) + "\t" +
                   fmt(self ? 1.0 : mt.nu_vs_isal) + "\t" + fmt(me.mean) +
                   "\t" + fmt(me.rsd) + "\t" + fmt(me.rb) + "\t" +
                   fmt(self ? 1.0 : me.nu_vs_isal) + "\t" + fmt(me.q10) +
                   "\t" + fmt(me.q90) + "\n";
      }
    }

    // Inference rows, paired-run statistics, draws, band (IS-AL only).
    if (isal_batch) {
      const auto& reps = isal_batch->reps;
      for (std::size_t r = 0; r < R; ++r) {
        const RepRecord& rec = reps[r];
        if (!rec.ok) continue;
        for (const auto& row : rec.inference) {
          inf_isal += eps_s + "\t" + std::to_string(r) + "\t" +
                      std::to_string(row.n) + "\t" + (row.ok ? "1" : "0") +
                      "\t" + fmt(row.g.a11) + "\t" + fmt(row.g.a12) + "\t" +
                      fmt(row.g.a22) + "\t" + fmt(row.cev) + "\t" +
                      (row.cp_hit ? "1" : "0") + "\t" + row.error + "\n";
        }
        if (rec.isal) {
          const auto& traj = rec.isal->traj;
          for (std::size_t k = 0; k < traj.size(); ++k) {
            draws += eps_s + "\t" + std::to_string(r) + "\t" +
                     std::to_string(k + 1) + "\t" +
                     std::to_string(traj.draws[k].index) + "\t" +
                     fmt(traj.draws[k].x) + "\t" +
                     std::to_string(traj.labels[k]) + "\t" +
                     fmt(traj.draws[k].likelihood_ratio) + "\t" +
                     fmt(traj.draws[k].theta_at_draw.alpha) + "\t" +
                     fmt(traj.draws[k].theta_at_draw.beta) + "\n";
          }
        }
      }

      const std::size_t pairs = std::min<std::size_t>(config.wn_pairs, R / 2);
      for (std::size_t p = 0; p < pairs; ++p) {
        const RepRecord& a = reps[2 * p];
        const RepRecord& b = reps[2 * p + 1];
        if (!a.ok || !b.ok || !a.isal || !b.isal) continue;
        for (std::size_t m : config.inference_sizes) {
          try {
            const inference::ConvergenceVerdict v = inference::w_statistic(
                a.isal->traj, b.isal->traj, m, 1.0 - config.xi);
            wn += eps_s + "\t" + std::to_string(p) + "\t" +
                  std::to_string(m) + "\t" + fmt(v.w_n) + "\t" +
                  fmt(v.threshold) + "\t" + (v.reject ? "1" : "0") +
                  "\t1\t\n";
          } catch (const std::exception& e) {
            wn += eps_s + "\t" + std::to_string(p) + "\t" + std::to_string(m) +
                  "\tnan\tnan\t0\t0\t" + std::string(e.what()) + "\n";
          }
          try {
            const inference::CombinedRuns cr =
                inference::combine_runs(a.isal->traj, b.isal->traj, m);
            const inference::Ellipsoid e12 =
                inference::combined_ellipsoid(cr, config.xi);
            combined += eps_s + "\t" + std::to_string(p) + "\t" +
                        std::to_string(m) + "\t" + fmt(cr.theta_12.alpha) +
                        "\t" + fmt(cr.theta_12.beta) + "\t" +
                        fmt(e12.volume()) + "\t" +
                        (e12.contains(ctx.theta_star) ? "1" : "0") +
                        "\t1\t\n";
          } catch (const std::exception& e) {
            combined += eps_s + "\t" + std::to_string(p) + "\t" +
                        std::to_string(m) + "\tnan\tnan\tnan\t0\t0\t" +
                        std::string(e.what()) + "\n";
          }
        }
      }

      // Fragility band from the first healthy replication at final n.
      if (!band_written) {
        for (const RepRecord& rec : reps) {
          if (!rec.ok || !rec.isal) continue;
          try {
            const inference::CovariancePack pack =
                inference::g_hat(rec.isal->traj, config.n);
            std::vector<double> ims(ctx.pool_x.size());
            for (std::size_t i = 0; i < ims.size(); ++i)
              ims[i] = std::exp(ctx.pool_x[i]);
            const double lo = quantile_type7(ims, 0.005);
            const double hi = quantile_type7(ims, 0.995);
            std::vector<double> grid(60);
            for (std::size_t g = 0; g < grid.size(); ++g)
              grid[g] = std::log(lo) + (std::log(hi) - std::log(lo)) *
                                           static_cast<double>(g) /
                                           static_cast<double>(grid.size() - 1);
            Rng band_rng(derive_seed(seed, 909));
            const Mat2 cov =
                pack.g_hat * (1.0 / static_cast<double>(config.n));
            const benchlab::FragilityBand band =
                benchlab::fragility_ci_from_asymptotics(
                    rec.isal->traj.fits[config.n].theta, cov, grid,
                    config.ci_draws, 0.05, 0.95, ctx.bounds, band_rng);
            band_tsv = "x\tim\tpoint\tlo\thi\n";
            for (std::size_t g = 0; g < band.x_grid.size(); ++g)
              band_tsv += fmt(band.x_grid[g]) + "\t" +
                          fmt(std::exp(band.x_grid[g])) + "\t" +
                          fmt(band.point[g]) + "\t" + fmt(band.lo[g]) + "\t" +
                          fmt(band.hi[g]) + "\n";
            band_written = true;
          } catch (const std::exception&) {
            continue;
          }
          break;
        }
      }
    }

    // MLE bootstrap rows (epsilon-independent; emit on the first pass only).
    if (want_mle && eps == eps_list.front()) {
      for (const auto& batch : batches) {
        if (batch.name != "mle") continue;
        for (std::size_t r = 0; r < R; ++r) {
          const RepRecord& rec = batch.reps[r];
          if (!rec.ok) continue;
          for (const auto& row : rec.mle_bootstrap) {
            inf_mle += std::to_string(r) + "\t" + std::to_string(row.n) +
                       "\t" + (row.ok ? "1" : "0") + "\t" + fmt(row.g.a11) +
                       "\t" + fmt(row.g.a12) + "\t" + fmt(row.g.a22) + "\t" +
                       fmt(row.cev) + "\t" + (row.cp_hit ? "1" : "0") + "\t" +
                       row.error + "\n";
          }
        }
      }
    }

    // Manifest bookkeeping per strategy/epsilon.
    for (const auto& batch : batches) {
      json arr = json::array();
      std::size_t failed = 0;
      for (std::size_t r = 0; r < R; ++r) {
        const RepRecord& rec = batch.reps[r];
        json jr;
        jr["rep"] = r;
        jr["seed"] = seed + r;
        jr["ok"] = rec.ok;
        jr["oracle_calls"] = rec.oracle_calls;
        if (!rec.ok) jr["error"] = rec.error;
        arr.push_back(jr);
        failed += rec.ok ? 0 : 1;
      }
      json entry;
      entry["replications"] = arr;
      entry["failed"] = failed;
      rep_info[batch.name + "@eps=" + eps_s] = entry;
    }
  }

  // Nonparametric reference curve over the pool.
  {
    std::vector<double> ims(ctx.pool_x.size());
    for (std::size_t i = 0; i < ims.size(); ++i)
      ims[i] = std::exp(ctx.pool_x[i]);
    Rng km_rng(derive_seed(seed, 707));
    const benchlab::ReferenceCurve rc = benchlab::nonparametric_reference(
        ims, ctx.pool_labels, config.kmeans_clusters, km_rng);
    refcurve_tsv = "im_center\tfailure_fraction\tcount\n";
    for (std::size_t i = 0; i < rc.centers.size(); ++i)
      refcurve_tsv += fmt(rc.centers[i]) + "\t" + fmt(rc.fraction[i]) + "\t" +
                      std::to_string(rc.counts[i]) + "\n";
  }

  // Case facts.
  json case_info;
  case_info["case"] = config.case_name;
  case_info["b"] = ctx.b;
  case_info["theta_star"] = {{"alpha", ctx.theta_star.alpha},
                             {"beta", ctx.theta_star.beta}};
  if (config.case_name == "oscillator") {
    case_info["capacity"] = osc_info.capacity;
    case_info["theta0_surrogate"] = {
        {"alpha", osc_info.theta0_surrogate.alpha},
        {"beta", osc_info.theta0_surrogate.beta}};
    case_info["pool_failure_fraction"] = osc_info.pool_failure_fraction;
    case_info["d_lin_q90"] = osc_info.d_lin_q90;
    case_info["im"] = (config.im.kind == ImChoice::Kind::kPga) ? "pga" : "sa";
  }

  const std::string cfg_text = config.to_json_string();
  manifest["config_hash"] = hex64(fnv1a64(cfg_text));
  manifest["strategies"] = rep_info;

  write_text_file(dir / "config.json", cfg_text);
  write_text_file(dir / "case_info.json", case_info.dump(2) + "\n");
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_text_file(dir / "metrics.tsv", metrics);
  write_text_file(dir / "risks.tsv", risks);
  write_text_file(dir / "inference_isal.tsv", inf_isal);
  if (want_mle && config.bootstrap_b > 0)
    write_text_file(dir / "inference_mle.tsv", inf_mle);
  write_text_file(dir / "wn.tsv", wn);
  write_text_file(dir / "combined.tsv", combined);
  write_text_file(dir / "draws_isal.tsv", draws);
  write_text_file(dir / "reference_curve.tsv", refcurve_tsv);
  if (band_written) write_text_file(dir / "fragility_band.tsv", band_tsv);

  json index;
  index["files"] = json::array();
  auto add = [&](const std::string& name, const std::string& what) {
    index["files"].push_back({{"name", name}, {"what", what}});
  };
  add("config.json", "resolved study configuration");
  add("case_info.json", "case-level reference facts (b, theta_star, capacity)");
  add("manifest.json", "reproducibility manifest: seeds, oracle calls, hash");
  add("metrics.tsv", "RSD/RB/nu summary per strategy and sample size");
  add("risks.tsv", "per-replication training/testing risks and parameters");
  add("inference_isal.tsv", "per-replication sandwich covariance, CEV, CP hits");
  if (want_mle && config.bootstrap_b > 0)
    add("inference_mle.tsv", "per-replication bootstrap covariance for MLE");
  add("wn.tsv", "paired-run convergence statistic series");
  add("combined.tsv", "combined two-run estimates and ellipsoids");
  add("draws_isal.tsv", "IS-AL draw records with frozen importance weights");
  add("reference_curve.tsv", "k-means nonparametric reference curve");
  if (band_written)
    add("fragility_band.tsv", "asymptotic fragility-curve confidence band");
  write_text_file(dir / "index.json", index.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

namespace {

double cell_d(const std::vector<std::string>& row, std::size_t i) {
  return std::stod(row.at(i));
}

}  // namespace

void report(const std::string& study_dir) {
  const fs::path dir(study_dir);
  std::vector<std::string> missing;
  for (const char* req : {"config.json", "case_info.json", "metrics.tsv",
                          "risks.tsv", "inference_isal.tsv", "wn.tsv"})
    if (!fs::exists(dir / req)) missing.push_back(req);
  if (!missing.empty()) {
    std::string msg = "report: missing artifacts in " + study_dir + ":";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }

  const StudyConfig config =
      StudyConfig::from_json_string(read_text_file(dir / "config.json"));
  const json case_info = json::parse(read_text_file(dir / "case_info.json"));
  const auto risks = read_tsv(dir / "risks.tsv");
  const auto metrics_rows = read_tsv(dir / "metrics.tsv");
  const auto inf_rows = read_tsv(dir / "inference_isal.tsv");
  const auto wn_rows = read_tsv(dir / "wn.tsv");

  const fs::path rep_dir = dir / "report";
  fs::create_directories(rep_dir);

  // Loss curves: mean and 10/90% quantiles per strategy and size.
  auto loss_fig = [&](bool train) {
    std::string out = "strategy\tepsilon\tn\tmean\tq10\tq90\n";
    std::map<std::string, std::vector<double>> acc;
    for (std::size_t i = 1; i < risks.size(); ++i) {
      const auto& row = risks[i];
      const std::string key = row[0] + "\t" + row[1] + "\t" + row[3];
      acc[key].push_back(cell_d(row, train ? 4 : 5));
    }
    for (const auto& [key, v] : acc) {
      out += key + "\t" + fmt(mean_of(v)) + "\t" +
             fmt(quantile_type7(v, 0.10)) + "\t" +
             fmt(quantile_type7(v, 0.90)) + "\n";
    }
    return out;
  };
  write_text_file(rep_dir / "fig_loss_train.tsv", loss_fig(true));
  write_text_file(rep_dir / "fig_loss_test.tsv", loss_fig(false));

  // Parameter distribution bands.
  {
    std::string out = "strategy\tepsilon\tn\tparam\tmean\tq10\tq90\n";
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
        acc;
    for (std::size_t i = 1; i < risks.size(); ++i) {
      const auto& row = risks[i];
      const std::string key = row[0] + "\t" + row[1] + "\t" + row[3];
      acc[key].first.push_back(cell_d(row, 6));
      acc[key].second.push_back(cell_d(row, 7));
    }
    for (const auto& [key, v] : acc) {
      out += key + "\talpha\t" + fmt(mean_of(v.first)) + "\t" +
             fmt(quantile_type7(v.first, 0.10)) + "\t" +
             fmt(quantile_type7(v.first, 0.90)) + "\n";
      out += key + "\tbeta\t" + fmt(mean_of(v.second)) + "\t" +
             fmt(quantile_type7(v.second, 0.10)) + "\t" +
             fmt(quantile_type7(v.second, 0.90)) + "\n";
    }
    write_text_file(rep_dir / "fig_params.tsv", out);
  }

  // W_n series (pass-through, pairs kept separate for plotting).
  {
    std::string out = "epsilon\tpair\tn\tw_n\tthreshold\treject\n";
    for (std::size_t i = 1; i < wn_rows.size(); ++i) {
      const auto& row = wn_rows[i];
      if (row.size() < 7 || row[6] != "1") continue;
      out += row[0] + "\t" + row[1] + "\t" + row[2] + "\t" + row[3] + "\t" +
             row[4] + "\t" + row[5] + "\n";
    }
    write_text_file(rep_dir / "fig_wn.tsv", out);
  }

  // CP and CEV versus n.
  {
    struct Agg {
      std::size_t hits = 0, total = 0;
      std::vector<double> cevs;
    };
    std::map<std::string, Agg> isal_agg;
    for (std::size_t i = 1; i < inf_rows.size(); ++i) {
      const auto& row = inf_rows[i];
      if (row.size() < 9 || row[3] != "1") continue;
      Agg& a = isal_agg[row[0] + "\t" + row[2]];
      a.total += 1;
      a.hits += (row[8] == "1") ? 1 : 0;
      a.cevs.push_back(cell_d(row, 7));
    }
    std::map<std::string, Agg> mle_agg;
    if (fs::exists(dir / "inference_mle.tsv")) {
      const auto mle_rows = read_tsv(dir / "inference_mle.tsv");
      for (std::size_t i = 1; i < mle_rows.size(); ++i) {
        const auto& row = mle_rows[i];
        if (row.size() < 8 || row[2] != "1") continue;
        Agg& a = mle_agg["-\t" + row[1]];
        a.total += 1;
        a.hits += (row[7] == "1") ? 1 : 0;
        a.cevs.push_back(cell_d(row, 6));
      }
    }
    std::string cp = "method\tepsilon\tn\tcp\tse\treps\n";
    std::string cev = "method\tepsilon\tn\tmedian\tq10\tq90\treps\n";
    auto emit = [&](const char* name, std::map<std::string, Agg>& agg) {
      for (auto& [key, a] : agg) {
        const double p =
            a.total ? static_cast<double>(a.hits) / a.total : 0.0;
        const double se =
            a.total ? std::sqrt(p * (1.0 - p) / a.total) : 0.0;
        cp += std::string(name) + "\t" + key + "\t" + fmt(p) + "\t" + fmt(se) +
              "\t" + std::to_string(a.total) + "\n";
        if (!a.cevs.empty())
          cev += std::string(name) + "\t" + key + "\t" +
                 fmt(quantile_type7(a.cevs, 0.5)) + "\t" +
                 fmt(quantile_type7(a.cevs, 0.10)) + "\t" +
                 fmt(quantile_type7(a.cevs, 0.90)) + "\t" +
                 std::to_string(a.cevs.size()) + "\n";
      }
    };
    emit("isal", isal_agg);
    emit("mle", mle_agg);
    write_text_file(rep_dir / "fig_cp.tsv", cp);
    write_text_file(rep_dir / "fig_cev.tsv", cev);
  }

  // Fragility CI band and reference curve pass through when present.
  if (fs::exists(dir / "fragility_band.tsv"))
    write_text_file(rep_dir / "fig_fragility_ci.tsv",
                    read_text_file(dir / "fragility_band.tsv"));
  if (fs::exists(dir / "reference_curve.tsv"))
    write_text_file(rep_dir / "fig_reference_curve.tsv",
                    read_text_file(dir / "reference_curve.tsv"));

  // Human-readable summary.
  std::string s;
  s += "study summary\n";
  s += "=============\n";
  s += "case: " + config.case_name + "\n";
  s += "replications: " + std::to_string(config.replications) +
       ", n: " + std::to_string(config.n) +
       ", n0: " + std::to_string(config.n0) + "\n";
  s += "epsilon: " + fmt(config.epsilon);
  if (!config.epsilon_sweep.empty()) {
    s += " (sweep:";
    for (double e : config.epsilon_sweep) s += " " + fmt(e);
    s += ")";
  }
  s += "\n";
  {
    const double b = case_info.at("b").get<double>();
    char line[96];
    std::snprintf(line, sizeof line, "b = %.2g (reference E[mu(1-mu)] = %.6g)\n",
                  b, b);
    s += line;
  }
  s += "theta_star: alpha=" +
       fmt(case_info.at("theta_star").at("alpha").get<double>()) + " beta=" +
       fmt(case_info.at("theta_star").at("beta").get<double>()) + "\n";
  if (config.case_name == "oscillator") {
    s += "capacity: " + fmt(case_info.at("capacity").get<double>()) +
         " m, pool failure fraction: " +
         fmt(case_info.at("pool_failure_fraction").get<double>()) + "\n";
  }
  s += "\nmetrics at the largest evaluated n (per strategy):\n";
  if (!config.eval_sizes.empty()) {
    const std::string n_tag = std::to_string(config.eval_sizes.back());
    for (std::size_t i = 1; i < metrics_rows.size(); ++i) {
      const auto& row = metrics_rows[i];
      if (row.size() < 14 || row[2] != n_tag) continue;
      char line[256];
      std::snprintf(line, sizeof line,
                    "  %-5s eps=%-8s n=%s  test: mean=%.4g rsd=%.3g rb=%.3g "
                    "nu=%.3g\n",
                    row[0].c_str(), row[1].c_str(), row[2].c_str(),
                    std::stod(row[8]), std::stod(row[9]), std::stod(row[10]),
                    std::stod(row[11]));
      s += line;
    }
  }
  write_text_file(rep_dir / "summary.txt", s);
}

}  // namespace fragal::study
