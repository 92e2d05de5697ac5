#include "ew/cli.hpp"

#include "ew/exact_ew.hpp"
#include "ew/gibbs_ew.hpp"
#include "ew/harness.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ew::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kExactKeys = {"lambda", "alpha", "sigma2", "kmax", "rank_tol", "budget"};
const std::set<std::string> kGibbsKeys = {"lambda", "K", "alpha", "sigma", "xi", "f_inf_bound", "L",
                                          "chain_length", "burn_in", "thin", "move_probs", "step_size",
                                          "chains", "seed"};
const std::set<std::string> kScenarioKeys = {"design", "rho", "n", "p", "theta_star", "support_size",
                                             "amplitude", "noise", "noise_level", "scenario_seed"};

std::set<std::string> keys(std::initializer_list<const std::set<std::string>*> groups,
                           std::initializer_list<const char*> extra) {
  std::set<std::string> out;
  for (const auto* g : groups) out.insert(g->begin(), g->end());
  out.insert(extra.begin(), extra.end());
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const std::string t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("key '" + key + "': not a number: '" + text + "'");
  return v;
}

void apply_threads(RunConfig& cfg) {
  const long long threads = cfg.integer("threads", 0);
  if (threads < 0) throw ConfigError("key 'threads' must be nonnegative");
  if (threads > 0) omp_set_num_threads(static_cast<int>(threads));
}

fs::path output_dir(RunConfig& cfg) {
  const fs::path out = cfg.require_text("out");
  fs::create_directories(out);
  return out;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

json support_json(const Support& J) {
  json a = json::array();
  for (int j : J) a.push_back(j + 1);
  return a;
}

void write_estimate(const fs::path& path, const ConfigEcho& echo, const CoefVector& theta) {
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index j = 0; j < theta.size(); ++j) rows.push_back({std::to_string(j + 1), format_double(theta[j])});
  write_csv(path, echo, {"index", "coefficient"}, rows);
}

void warn_normalization(const DesignSample& sample, std::ostream& err) {
  const auto bad = check_normalization(sample, 1e-6);
  if (bad.empty()) return;
  err << "warning: " << bad.size() << " dictionary column(s) not normalized to empirical norm 1 (first: x"
      << bad.front().column + 1 << " has norm " << format_double(bad.front().norm) << ")\n";
}

ExactEWConfig exact_config(RunConfig& cfg, int n, int p, std::optional<double> sigma2_default = std::nullopt) {
  ExactEWConfig c;
  if (sigma2_default && !cfg.has("sigma2")) {
    c.sigma2 = *sigma2_default;
    cfg.note("sigma2", format_double(c.sigma2));
  } else {
    c.sigma2 = cfg.require_real("sigma2");
  }
  if (!(c.sigma2 > 0.0)) throw ConfigError("key 'sigma2' must be positive");
  c.alpha = cfg.real("alpha", 0.5);
  c.kmax = static_cast<int>(cfg.integer("kmax", default_kmax(n, p)));
  c.rank_tol = cfg.real("rank_tol", kDefaultRankTol);
  const long long budget = cfg.integer("budget", static_cast<long long>(kDefaultSubsetBudget));
  if (budget < 1) throw ConfigError("key 'budget' must be positive");
  c.budget = static_cast<std::uint64_t>(budget);
  c.lambda = cfg.real("lambda", default_temperature_exact(n, c.sigma2));
  c.validate();
  return c;
}

struct GibbsDefaults {
  std::optional<double> sigma, xi, f_inf_bound, L;
};

GibbsConfig gibbs_config(RunConfig& cfg, const DesignSample* sample, int n, int p, const GibbsDefaults& d,
                         std::ostream& err) {
  GibbsConfig c;
  c.K = cfg.real("K", 2.0);
  if (!(c.K > 1.0)) throw ConfigError("key 'K' must exceed 1 (Take K>1)");
  c.alpha = cfg.real("alpha", 0.5);
  c.sigma = d.sigma && !cfg.has("sigma") ? *d.sigma : cfg.maybe_real("sigma").value_or(1.0);
  c.xi = d.xi && !cfg.has("xi") ? *d.xi : cfg.maybe_real("xi").value_or(1.0);
  if (d.sigma && !cfg.has("sigma")) cfg.note("sigma", format_double(c.sigma));
  if (d.xi && !cfg.has("xi")) cfg.note("xi", format_double(c.xi));

  if (cfg.has("f_inf_bound")) {
    c.f_inf_bound = cfg.require_real("f_inf_bound");
  } else if (d.f_inf_bound) {
    c.f_inf_bound = *d.f_inf_bound;
    cfg.note("f_inf_bound", format_double(c.f_inf_bound));
  } else {
    c.f_inf_bound = sample->y().cwiseAbs().maxCoeff();
    cfg.note("f_inf_bound", format_double(c.f_inf_bound));
    err << "warning: f_inf_bound not supplied; using max|y_i| = " << format_double(c.f_inf_bound)
        << " as a crude plug-in\n";
  }
  if (cfg.has("L")) {
    c.L = cfg.require_real("L");
  } else {
    c.L = d.L ? *d.L : sample->max_abs_entry();
    cfg.note("L", format_double(c.L));
  }

  if (cfg.has("lambda")) {
    c.lambda = cfg.require_real("lambda");
  } else {
    if (!d.sigma && !cfg.has("sigma")) throw ConfigError("missing required key 'sigma' (needed for the default lambda)");
    if (!d.xi && !cfg.has("xi")) throw ConfigError("missing required key 'xi' (needed for the default lambda)");
    c.lambda = default_temperature_gibbs(n, c.sigma, c.xi, c.f_inf_bound, c.L, c.K);
    cfg.note("lambda", format_double(c.lambda));
  }
  c.chain_length = cfg.integer("chain_length", 100'000);
  c.burn_in = cfg.integer("burn_in", std::min<long long>(10'000, c.chain_length / 2));
  c.thin = cfg.integer("thin", 1);
  if (cfg.has("move_probs")) {
    const auto mp = cfg.reals("move_probs");
    if (mp.size() != 4) throw ConfigError("key 'move_probs' needs four values: update,add,remove,swap");
    c.move_probs = {mp[0], mp[1], mp[2], mp[3]};
  } else {
    cfg.note("move_probs", "0.7,0.1,0.1,0.1");
  }
  c.step_size = cfg.real("step_size", default_step_size(c.K, p));
  c.chains = static_cast<int>(cfg.integer("chains", 1));
  const long long seed = cfg.integer("seed", 1);
  c.seed = static_cast<std::uint64_t>(seed);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Scenario scenario_config(RunConfig& cfg) {
  Scenario s;
  const std::string design = cfg.text("design", "orthonormal");
  if (design == "orthonormal") s.design = DesignKind::Orthonormal;
  else if (design == "correlated") s.design = DesignKind::Correlated;
  else if (design == "random-uniform") s.design = DesignKind::RandomUniform;
  else throw ConfigError("key 'design': expected orthonormal, correlated or random-uniform");
  s.rho = cfg.real("rho", 0.0);
  s.n = static_cast<int>(cfg.integer("n", 50));
  s.p = static_cast<int>(cfg.integer("p", 10));
  if (s.n < 1 || s.p < 1) throw ConfigError("keys 'n' and 'p' must be positive");
  if (cfg.has("theta_star")) {
    const auto t = cfg.reals("theta_star");
    if (static_cast<int>(t.size()) != s.p) throw ConfigError("key 'theta_star' must list p values");
    s.theta_star = Eigen::Map<const Vector>(t.data(), s.p);
  } else {
    const long long k = cfg.integer("support_size", 2);
    const double amp = cfg.real("amplitude", 1.0);
    if (k < 0 || k > s.p) throw ConfigError("key 'support_size' must lie in [0, p]");
    s.theta_star = CoefVector::Zero(s.p);
    s.theta_star.head(k).setConstant(amp);
  }
  const std::string noise = cfg.text("noise", "gaussian");
  if (noise == "gaussian") s.noise = NoiseKind::Gaussian;
  else if (noise == "uniform-bounded") s.noise = NoiseKind::UniformBounded;
  else throw ConfigError("key 'noise': expected gaussian or uniform-bounded");
  s.noise_level = cfg.real("noise_level", 1.0);
  s.seed = static_cast<std::uint64_t>(cfg.integer("scenario_seed", 1));
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

std::string estimator_kind(RunConfig& cfg) {
  const std::string kind = cfg.text("estimator", "exact");
  if (kind != "exact" && kind != "gibbs") throw ConfigError("key 'estimator': expected exact or gibbs");
  return kind;
}

}  // namespace

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string(), 0);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", lineno);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", lineno);
    if (cfg.has(key)) throw ParseError("duplicate key '" + key + "'", lineno);
    cfg.set(key, trim(line.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

void RunConfig::restrict_to(const std::set<std::string>& allowed) const {
  for (const auto& [k, v] : values_)
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "'");
}

std::string RunConfig::text(const std::string& key, const std::string& fallback) {
  const auto it = values_.find(key);
  const std::string v = it == values_.end() ? fallback : it->second;
  echo_[key] = v;
  return v;
}

std::string RunConfig::require_text(const std::string& key) {
  if (!has(key)) throw ConfigError("missing required key '" + key + "'");
  return text(key, {});
}

double RunConfig::real(const std::string& key, double fallback) {
  const double v = has(key) ? parse_real(key, values_.at(key)) : fallback;
  echo_[key] = format_double(v);
  return v;
}

double RunConfig::require_real(const std::string& key) {
  if (!has(key)) throw ConfigError("missing required key '" + key + "'");
  return real(key, 0.0);
}

std::optional<double> RunConfig::maybe_real(const std::string& key) {
  if (!has(key)) return std::nullopt;
  return real(key, 0.0);
}

long long RunConfig::integer(const std::string& key, long long fallback) {
  long long v = fallback;
  if (has(key)) {
    const std::string t = trim(values_.at(key));
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
      throw ConfigError("key '" + key + "': not an integer: '" + t + "'");
  }
  echo_[key] = std::to_string(v);
  return v;
}

bool RunConfig::flag(const std::string& key, bool fallback) {
  bool v = fallback;
  if (has(key)) {
    const std::string t = trim(values_.at(key));
    if (t == "true" || t == "1" || t == "yes") v = true;
    else if (t == "false" || t == "0" || t == "no") v = false;
    else throw ConfigError("key '" + key + "': expected true or false");
  }
  echo_[key] = v ? "true" : "false";
  return v;
}

std::vector<double> RunConfig::reals(const std::string& key) {
  std::vector<double> out;
  if (!has(key)) return out;
  std::istringstream is(values_.at(key));
  std::string cell;
  while (std::getline(is, cell, ',')) out.push_back(parse_real(key, cell));
  echo_[key] = values_.at(key);
  return out;
}

int cmd_fit_exact(RunConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.restrict_to(keys({&kExactKeys}, {"input", "out", "threads"}));
  apply_threads(cfg);
  const DesignSample sample = read_dataset_csv(cfg.require_text("input"));
  const ExactEWConfig ec = exact_config(cfg, sample.n(), sample.p());
  const fs::path dir = output_dir(cfg);
  warn_normalization(sample, err);
  if (!ec.within_guarantee(sample.n()))
    err << "warning: lambda exceeds n/(4 sigma2); the expectation bound is not guaranteed\n";

  const AggregateEstimate agg = aggregate_exact(sample, ec);
  if (!agg.theta.allFinite() || !std::isfinite(agg.sure.risk)) throw std::domain_error("non-finite aggregate");

  const ConfigEcho& echo = cfg.echo();
  write_estimate(dir / "estimate.csv", echo, agg.theta);
  json ens = json::array();
  for (std::size_t k = 0; k < agg.ensemble.size(); ++k)
    ens.push_back({{"support", support_json(agg.ensemble[k].support)},
                   {"log_weight", agg.log_weights[k]},
                   {"residual_risk", agg.ensemble[k].residual_risk}});
  json doc = {{"config", echo_to_json(echo)},
              {"lambda", ec.lambda},
              {"within_guarantee", ec.within_guarantee(sample.n())},
              {"sure", agg.sure.risk},
              {"divergence", agg.sure.divergence},
              {"theta", vector_json(agg.theta)},
              {"ensemble", ens}};
  write_text(dir / "ensemble.json", dump_json(doc));
  out << "fit-exact: " << agg.ensemble.size() << " supports, lambda=" << format_double(ec.lambda)
      << ", sure=" << format_double(agg.sure.risk) << '\n';
  return 0;
}

int cmd_fit_gibbs(RunConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.restrict_to(keys({&kGibbsKeys}, {"input", "out", "threads", "trace"}));
  apply_threads(cfg);
  const DesignSample sample = read_dataset_csv(cfg.require_text("input"));
  const GibbsConfig gc = [&] {
    GibbsConfig c = gibbs_config(cfg, &sample, sample.n(), sample.p(), {}, err);
    c.record_trace = cfg.flag("trace", false);
    return c;
  }();
  const fs::path dir = output_dir(cfg);
  warn_normalization(sample, err);

  const GibbsEstimate est = gibbs_estimate(sample, gc);
  if (!est.theta.allFinite()) throw std::domain_error("non-finite Gibbs estimate");

  const ConfigEcho& echo = cfg.echo();
  write_estimate(dir / "estimate.csv", echo, est.theta);
  json rates = json::object();
  for (int m = 0; m < kMoveKinds; ++m) rates[move_name(static_cast<MoveKind>(m))] = est.acceptance_rates[m];
  json doc = {{"config", echo_to_json(echo)},
              {"lambda", gc.lambda},
              {"C1", gibbs_constant(gc.sigma, gc.xi, gc.f_inf_bound, gc.L, gc.K)},
              {"theta", vector_json(est.theta)},
              {"support_frequency", vector_json(est.support_frequency)},
              {"acceptance_rates", rates},
              {"samples_used", est.samples_used}};
  write_text(dir / "report.json", dump_json(doc));
  if (gc.record_trace) {
    std::vector<std::vector<std::string>> rows;
    for (const TraceRow& r : est.trace)
      rows.push_back({std::to_string(r.iteration), std::to_string(r.support_size), format_double(r.l1),
                      format_double(r.risk), r.accepted ? move_name(r.move) : "none"});
    write_csv(dir / "trace.csv", echo, {"iteration", "support_size", "l1_norm", "risk", "accepted_move"}, rows);
  }
  out << "fit-gibbs: " << est.samples_used << " samples, lambda=" << format_double(gc.lambda) << '\n';
  return 0;
}

int cmd_simulate(RunConfig& cfg, std::ostream& out, std::ostream& err, bool validate) {
  cfg.restrict_to(keys({&kExactKeys, &kGibbsKeys, &kScenarioKeys},
                       {"estimator", "reps", "epsilon", "out", "threads", "record_timing"}));
  apply_threads(cfg);
  const std::string kind = estimator_kind(cfg);
  const Scenario s = scenario_config(cfg);
  const long long reps = cfg.integer("reps", 100);
  if (reps < 1) throw ConfigError("key 'reps' must be at least 1");
  const std::uint64_t base_seed = static_cast<std::uint64_t>(cfg.integer("seed", 1));
  const bool timing = cfg.flag("record_timing", false);
  const fs::path dir = output_dir(cfg);

  const CoefVector theta_bar = reference_theta(s);
  const int support_size = support_of(theta_bar).size();
  EstimatorSpec est;
  double bound = 0.0;
  json extra = json::object();
  if (kind == "exact") {
    est.kind = EstimatorSpec::Kind::Exact;
    est.exact = exact_config(cfg, s.n, s.p, s.noise_variance());
    if (s.noise != NoiseKind::Gaussian || s.random_design())
      err << "warning: the expectation bound assumes gaussian noise and a deterministic design\n";
    // f = f_{theta_star}, so the approximation error at theta_bar vanishes.
    bound = bound_expectation_size(support_size, 0.0, s.p, s.n, est.exact.sigma2, est.exact.alpha);
    extra["bound_kind"] = "expectation";
  } else {
    est.kind = EstimatorSpec::Kind::Gibbs;
    const auto [sigma, xi] = s.moment_constants();
    GibbsDefaults d{sigma, xi, f_inf_norm(s), dictionary_sup_norm(s)};
    // The chain seed is derived per replication; "seed" is the base seed here.
    est.gibbs = gibbs_config(cfg, nullptr, s.n, s.p, d, err);
    const double eps = cfg.real("epsilon", 0.05);
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("key 'epsilon' must lie in (0,1)");
    const GibbsConfig& g = est.gibbs;
    const double c1 = gibbs_constant(g.sigma, g.xi, g.f_inf_bound, g.L, g.K);
    if (l1_norm(theta_bar) > g.K) err << "warning: |theta_bar|_1 exceeds K; the probability bound does not apply\n";
    bound = bound_probability(support_size, 0.0, eps, s.n, s.p, g.alpha, g.K, c1, g.L);
    extra["bound_kind"] = "probability";
    extra["epsilon"] = eps;
    extra["C1"] = c1;
  }

  const ExperimentReport rep = run_replications(est, s, static_cast<int>(reps), base_seed, bound);

  const ConfigEcho& echo = cfg.echo();
  json doc = {{"config", echo_to_json(echo)},
              {"theta_bar", vector_json(theta_bar)},
              {"reps", reps},
              {"failures", rep.failures},
              {"mean_excess_risk", rep.mean},
              {"standard_error", rep.standard_error},
              {"quantiles", {{"q05", rep.q05}, {"q50", rep.q50}, {"q95", rep.q95}}},
              {"bound", rep.bound},
              {"violation_fraction", rep.violation_fraction},
              {"mean_in_sample_loss", rep.loss_mean},
              {"in_sample_loss_se", rep.loss_se},
              {"noise_variance", s.noise_variance()}};
  doc.update(extra);
  if (kind == "exact") {
    doc["mean_sure"] = rep.sure_mean;
    doc["sure_se"] = rep.sure_se;
  }
  if (timing) doc["wall_seconds"] = rep.wall_seconds;
  write_text(dir / "report.json", dump_json(doc));

  std::vector<std::vector<std::string>> rows;
  for (std::size_t r = 0; r < rep.replications.size(); ++r) {
    const ReplicationResult& x = rep.replications[r];
    std::vector<std::string> row = {std::to_string(r + 1), std::to_string(x.seed), x.ok ? "1" : "0",
                                    format_double(x.excess_risk), format_double(x.absolute_risk),
                                    format_double(x.in_sample_loss), format_double(x.sure), x.error};
    if (timing) row.push_back(format_double(x.seconds));
    rows.push_back(std::move(row));
  }
  std::vector<std::string> header = {"rep", "seed", "ok", "excess_risk", "absolute_risk", "in_sample_loss", "sure",
                                     "error"};
  if (timing) header.push_back("seconds");
  write_csv(dir / "replications.csv", echo, header, rows);

  out << (validate ? "validate" : "simulate") << ": mean_excess=" << format_double(rep.mean)
      << " se=" << format_double(rep.standard_error) << " bound=" << format_double(rep.bound)
      << " violation_fraction=" << format_double(rep.violation_fraction) << " failures=" << rep.failures << '\n';
  if (!validate) return 0;

  const bool pass = kind == "exact" ? rep.mean <= rep.bound
                                    : rep.violation_fraction <= extra["epsilon"].get<double>();
  out << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? 0 : 1;
}

int cmd_tune(RunConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.restrict_to(keys({&kExactKeys, &kGibbsKeys},
                       {"input", "out", "threads", "estimator", "lambda_grid", "lambda_multipliers", "folds",
                        "fold_seed"}));
  if (cfg.has("lambda")) throw ConfigError("key 'lambda' is not used by tune; give lambda_grid or lambda_multipliers");
  apply_threads(cfg);
  const std::string kind = estimator_kind(cfg);
  const DesignSample sample = read_dataset_csv(cfg.require_text("input"));
  const int folds = static_cast<int>(cfg.integer("folds", 5));
  if (folds < 2 || folds > sample.n()) throw ConfigError("key 'folds' must lie in [2, n]");
  const std::uint64_t fold_seed = static_cast<std::uint64_t>(cfg.integer("fold_seed", 1));

  EstimatorSpec est;
  double theory = 0.0;
  if (kind == "exact") {
    est.kind = EstimatorSpec::Kind::Exact;
    est.exact = exact_config(cfg, sample.n(), sample.p());
    theory = est.exact.lambda;
  } else {
    est.kind = EstimatorSpec::Kind::Gibbs;
    est.gibbs = gibbs_config(cfg, &sample, sample.n(), sample.p(), {}, err);
    theory = est.gibbs.lambda;
  }

  std::vector<double> grid;
  if (cfg.has("lambda_grid")) {
    grid = cfg.reals("lambda_grid");
  } else if (cfg.has("lambda_multipliers")) {
    for (double m : cfg.reals("lambda_multipliers")) grid.push_back(m * theory);
    cfg.note("lambda_theory", format_double(theory));
  } else {
    throw ConfigError("missing required key 'lambda_grid' (or 'lambda_multipliers')");
  }
  if (grid.empty()) throw ConfigError("lambda grid is empty");
  for (double l : grid)
    if (!(l > 0.0) && !(kind == "gibbs" && l == 0.0)) throw ConfigError("lambda grid values must be positive");

  const CvResult cv = cross_validate(sample, est, grid, folds, fold_seed);
  const fs::path dir = output_dir(cfg);
  const ConfigEcho& echo = cfg.echo();
  json table = json::array();
  std::vector<std::vector<std::string>> rows;
  for (const CvRow& r : cv.rows) {
    table.push_back({{"lambda", r.lambda}, {"cv_error", r.cv_error}, {"cv_se", r.cv_se}});
    rows.push_back({format_double(r.lambda), format_double(r.cv_error), format_double(r.cv_se)});
  }
  write_text(dir / "report.json",
             dump_json({{"config", echo_to_json(echo)}, {"cv", table}, {"selected_lambda", cv.selected_lambda}}));
  write_csv(dir / "cv.csv", echo, {"lambda", "cv_error", "cv_se"}, rows);
  out << "tune: selected lambda=" << format_double(cv.selected_lambda) << '\n';
  return 0;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse regression by exponential weights"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"fit-exact", "aggregate subset least-squares fits on a CSV dataset"},
           {"fit-gibbs", "Gibbs posterior mean by reversible-jump MCMC on a CSV dataset"},
           {"simulate", "Monte Carlo study on a synthetic scenario"},
           {"validate", "simulate, then check the oracle bound (exit 1 on failure)"},
           {"tune", "cross-validate the temperature"}}) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "flat key=value config file");
    sub->allow_extras();
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  try {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
    const std::vector<std::string> extras = chosen->remaining();
    for (std::size_t k = 0; k < extras.size(); ++k) {
      const std::string& arg = extras[k];
      if (arg.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + arg + "'");
      const std::string body = arg.substr(2);
      if (const auto eq = body.find('='); eq != std::string::npos) {
        cfg.set(body.substr(0, eq), body.substr(eq + 1));
      } else {
        if (k + 1 >= extras.size()) throw ConfigError("flag '" + arg + "' needs a value");
        cfg.set(body, extras[++k]);
      }
    }
    cfg.note("command", command);
    if (command == "fit-exact") return cmd_fit_exact(cfg, out, err);
    if (command == "fit-gibbs") return cmd_fit_gibbs(cfg, out, err);
    if (command == "simulate") return cmd_simulate(cfg, out, err, false);
    if (command == "validate") return cmd_simulate(cfg, out, err, true);
    return cmd_tune(cfg, out, err);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const BudgetExceeded& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::domain_error& e) {
    err << "error: numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace ew::cli
