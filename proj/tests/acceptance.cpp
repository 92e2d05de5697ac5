// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "ew/cli.hpp"
#include "ew/exact_ew.hpp"
#include "ew/gibbs_ew.hpp"
#include "ew/harness.hpp"
#include "ew/io.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace ew;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const fs::path kWork = fs::current_path() / "acceptance_work";

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::vector<const char*> argv = {"sparse-ew"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

void write_config(const fs::path& path, const std::map<std::string, std::string>& kv) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    files[e.path().filename().string()] = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  return files;
}

// Standard error of a correlated series by non-overlapping batch means.
double batch_means_se(const std::vector<double>& xs, int batches = 100) {
  const std::size_t len = xs.size() / batches;
  std::vector<double> means(batches);
  for (int b = 0; b < batches; ++b)
    means[b] = std::accumulate(xs.begin() + b * len, xs.begin() + (b + 1) * len, 0.0) / len;
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / batches;
  double ss = 0.0;
  for (double x : means) ss += (x - m) * (x - m);
  return std::sqrt(ss / (batches - 1) / batches);
}

Outcome prior_masses() {
  const double expected[] = {4.0 / 7, 1.0 / 7, 1.0 / 7};
  double worst = 0.0;
  for (int k = 0; k <= 2; ++k) worst = std::max(worst, std::abs(std::exp(log_prior(k, 2, 2, 0.5)) - expected[k]));
  bool ok = worst <= 1e-14;

  double grid_worst = 0.0;
  int cases = 0;
  for (int p = 1; p <= 8; ++p)
    for (int n = 1; n <= 10; ++n)
      for (double alpha : {0.05, 0.3, 0.5, 0.9}) {
        double total = 0.0;
        for (const Support& J : enumerate_supports(p, n, p)) total += std::exp(log_prior(J.size(), p, n, alpha));
        double num = 0.0, den = 0.0;
        for (int k = 0; k <= n; ++k) {
          den += std::pow(alpha, k);
          if (k <= p) num += std::pow(alpha, k);
        }
        grid_worst = std::max(grid_worst, std::abs(total - num / den));
        ++cases;
      }
  ok = ok && grid_worst <= 1e-12;
  return {ok, fmt("p=n=2 max error %.2e (tol 1e-14); %d grid cases, max mass error %.2e (tol 1e-12)", worst, cases,
                  grid_worst)};
}

Outcome oracle_equivalence() {
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int p = 1 + static_cast<int>(rng.index(8));
    const int n = 3 + static_cast<int>(rng.index(18));
    const DesignSample s = test::random_sample(n, p, rng);
    ExactEWConfig cfg;
    cfg.sigma2 = 0.5 + rng.uniform();
    cfg.lambda = n / (4 * cfg.sigma2);
    cfg.alpha = 0.2 + 0.6 * rng.uniform();
    cfg.kmax = std::min(n - 1, p);
    const CoefVector got = aggregate_exact(s, cfg).theta;
    const CoefVector ref = test::naive_aggregate(s, cfg.lambda, cfg.alpha, cfg.sigma2, cfg.kmax);
    worst = std::max(worst, (got - ref).norm() / std::max(ref.norm(), 1e-300));
  }
  return {worst <= 1e-10, fmt("50 instances, max relative error %.2e (tol 1e-10)", worst)};
}

Outcome sure_unbiased() {
  Scenario s;
  s.design = DesignKind::Orthonormal;
  s.n = 30;
  s.p = 5;
  s.theta_star = (CoefVector(5) << 1.0, -0.5, 0.0, 0.0, 0.25).finished();
  s.noise_level = 1.0;
  EstimatorSpec est;
  est.exact.sigma2 = 1.0;
  est.exact.lambda = default_temperature_exact(s.n, 1.0);
  est.exact.kmax = 5;
  const ExperimentReport r = run_replications(est, s, 10'000, 31, 0.0);
  double paired = 0.0, paired_ss = 0.0;
  std::vector<double> diff;
  for (const auto& rep : r.replications) diff.push_back(rep.sure - rep.in_sample_loss);
  paired = std::accumulate(diff.begin(), diff.end(), 0.0) / diff.size();
  for (double d : diff) paired_ss += (d - paired) * (d - paired);
  const double paired_se = std::sqrt(paired_ss / (diff.size() - 1) / diff.size());
  const double combined = std::hypot(r.sure_se, r.loss_se);
  const double gap = std::abs(r.sure_mean - r.loss_mean);
  return {r.failures == 0 && gap <= 3 * combined,
          fmt("mean SURE %.5f (se %.5f), mean loss %.5f (se %.5f), |gap| %.5f <= 3 x %.5f; paired diff %.5f (se %.5f)",
              r.sure_mean, r.sure_se, r.loss_mean, r.loss_se, gap, combined, paired, paired_se)};
}

Outcome expectation_bound() {
  const fs::path dir = kWork / "expectation_bound";
  write_config(dir / "run.cfg", {{"design", "correlated"},
                                 {"rho", "0.3"},
                                 {"n", "50"},
                                 {"p", "20"},
                                 {"support_size", "2"},
                                 {"amplitude", "1"},
                                 {"noise", "gaussian"},
                                 {"noise_level", "1"},
                                 {"sigma2", "1"},
                                 {"alpha", "0.5"},
                                 {"kmax", "3"},
                                 {"reps", "500"},
                                 {"seed", "42"},
                                 {"out", (dir / "out").string()}});
  std::string text;
  const int code = run_cli({"validate", "-c", (dir / "run.cfg").string()}, &text);
  if (code != 0 && code != 1) return {false, "validate exited with " + std::to_string(code) + ": " + text};
  const auto doc = read_json(dir / "out" / "report.json");
  const double mean = doc["mean_excess_risk"], se = doc["standard_error"], bound = doc["bound"];
  return {code == 0 && mean <= bound && doc["failures"] == 0,
          fmt("500 reps, mean ||f_hat - f||_n^2 = %.5f (MC se %.5f) <= bound %.5f", mean, se, bound)};
}

// Fixture with n rows of +-1 entries and small noise; lambda at the default temperature.
std::pair<DesignSample, GibbsConfig> quadrature_fixture(int p, std::uint64_t seed) {
  Rng rng(seed);
  const int n = 400;
  Matrix phi(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) phi(i, j) = rng.coin() ? 1.0 : -1.0;
  const CoefVector truth = p == 1 ? (CoefVector(1) << 0.8).finished() : (CoefVector(2) << 0.8, -0.5).finished();
  const double sigma = 0.3;
  const Vector y = phi * truth + sigma * test::random_vector(n, rng);
  DesignSample s(phi, y);
  GibbsConfig cfg;
  cfg.K = 2.0;
  cfg.sigma = sigma;
  cfg.xi = sigma;
  cfg.f_inf_bound = truth.cwiseAbs().sum();
  cfg.L = 1.0;
  cfg.lambda = default_temperature_gibbs(n, cfg.sigma, cfg.xi, cfg.f_inf_bound, cfg.L, cfg.K);
  cfg.burn_in = 10'000;
  cfg.chain_length = cfg.burn_in + 1'000'000;
  cfg.step_size = 1.0;
  cfg.seed = seed;
  return {std::move(s), cfg};
}

Outcome gibbs_vs_quadrature() {
  bool ok = true;
  std::string detail;
  for (int p : {1, 2}) {
    const auto [s, cfg] = quadrature_fixture(p, 70 + p);
    const GibbsEstimate g = gibbs_estimate(s, cfg);
    const QuadratureResult q = quadrature_gibbs_mean(s, cfg);
    double worst_excess = 0.0;
    for (int j = 0; j < p; ++j) {
      const double tol = std::max(0.02 * std::abs(q.theta[j]), 0.01);
      const double err = std::abs(g.theta[j] - q.theta[j]);
      ok = ok && err <= tol;
      worst_excess = std::max(worst_excess, err / tol);
      detail += fmt("p=%d j=%d mcmc %.5f quad %.5f (quad err %.1e) |diff| %.5f tol %.5f; ", p, j + 1, g.theta[j],
                    q.theta[j], q.error_estimate, err, tol);
    }
    detail += fmt("lambda*=%.4f; ", cfg.lambda);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome probability_bound() {
  const fs::path dir = kWork / "probability_bound";
  write_config(dir / "run.cfg", {{"estimator", "gibbs"},
                                 {"design", "random-uniform"},
                                 {"n", "100"},
                                 {"p", "30"},
                                 {"support_size", "2"},
                                 {"amplitude", "1"},
                                 {"noise", "uniform-bounded"},
                                 {"noise_level", "0.5"},
                                 {"K", "2"},
                                 {"alpha", "0.5"},
                                 {"epsilon", "0.05"},
                                 {"chain_length", "100000"},
                                 {"burn_in", "10000"},
                                 {"reps", "200"},
                                 {"seed", "43"},
                                 {"out", (dir / "out").string()}});
  std::string text;
  const int code = run_cli({"validate", "-c", (dir / "run.cfg").string()}, &text);
  if (code != 0 && code != 1) return {false, "validate exited with " + std::to_string(code) + ": " + text};
  const auto doc = read_json(dir / "out" / "report.json");
  const double frac = doc["violation_fraction"], bound = doc["bound"], q95 = doc["quantiles"]["q95"];
  return {code == 0 && frac <= 0.05 && doc["failures"] == 0,
          fmt("200 reps, violation fraction %.3f <= 0.05 (remainder %.3f, mean excess %.4f, q95 %.4f)", frac, bound,
              doc["mean_excess_risk"].get<double>(), q95)};
}

Outcome sampler_invariants() {
  bool ok = true;
  std::string detail;
  const int draws = 100'000;
  Rng rng(77);
  for (const auto [d, radius] : std::vector<std::pair<int, double>>{{1, 1.0}, {3, 2.0}, {5, 1.0}}) {
    std::vector<int> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    const Support J(idx);
    double sum = 0.0, sq = 0.0;
    bool feasible = true;
    for (int i = 0; i < draws; ++i) {
      const CoefVector t = sample_uniform_l1_ball(J, d + 2, radius, rng);
      const double l1 = l1_norm(t);
      feasible = feasible && l1 <= radius && t.tail(2).isZero(0.0);
      sum += l1;
      sq += l1 * l1;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sq / draws - mean * mean) / (draws - 1));
    const double target = radius * d / (d + 1.0);
    const bool pass = feasible && std::abs(mean - target) <= 3 * se;
    ok = ok && pass;
    detail += fmt("(d=%d,R=%g) E|theta|_1 %.5f vs %.5f (se %.5f)%s; ", d, radius, mean, target, se,
                  feasible ? "" : " INFEASIBLE");
  }

  Rng data_rng(78);
  const int p = 4, n = 6;
  const DesignSample s = test::random_sample(n, p, data_rng);
  GibbsConfig cfg;
  cfg.lambda = 0.0;
  cfg.step_size = 0.5;
  const GibbsKernel kernel(s, cfg);
  ChainState state = kernel.initial_state(rng);
  const int steps = 1'000'000;
  std::vector<std::vector<double>> indicator(p + 1, std::vector<double>(steps));
  for (int t = 0; t < steps; ++t) {
    kernel.step(state, rng);
    for (int k = 0; k <= p; ++k) indicator[k][t] = state.support.size() == k;
  }
  double total = 0.0;
  for (int k = 0; k <= p; ++k) total += std::pow(cfg.alpha, k);
  detail += "lambda=0 chain sizes:";
  for (int k = 0; k <= p; ++k) {
    const double freq = std::accumulate(indicator[k].begin(), indicator[k].end(), 0.0) / steps;
    const double target = std::pow(cfg.alpha, k) / total;
    const double se = batch_means_se(indicator[k]);
    ok = ok && std::abs(freq - target) <= 3 * se;
    detail += fmt(" k=%d %.4f vs %.4f (se %.4f)", k, freq, target, se);
  }
  return {ok, detail};
}

Outcome cli_determinism() {
  const fs::path dir = kWork / "determinism";
  fs::remove_all(dir);
  Rng rng(99);
  Matrix phi = test::random_matrix(40, 6, rng);
  const CoefVector truth = (CoefVector(6) << 1.0, 0.0, -0.7, 0.0, 0.0, 0.0).finished();
  const Vector y = phi * truth + 0.5 * test::random_vector(40, rng);
  write_dataset_csv(dir / "data.csv", DesignSample(phi, y));
  const std::string data = (dir / "data.csv").string();

  const std::vector<std::pair<std::string, std::vector<std::string>>> runs = {
      {"fit-exact", {"--input", data, "--sigma2", "0.25", "--kmax", "3"}},
      {"fit-gibbs",
       {"--input", data, "--sigma", "0.5", "--xi", "0.5", "--f_inf_bound", "4", "--chain_length", "20000",
        "--burn_in", "2000", "--seed", "8", "--chains", "2", "--trace", "true"}},
      {"simulate", {"--n", "30", "--p", "6", "--kmax", "2", "--reps", "20", "--seed", "5"}},
      {"validate",
       {"--estimator", "gibbs", "--design", "random-uniform", "--noise", "uniform-bounded", "--noise_level", "0.5",
        "--n", "40", "--p", "6", "--chain_length", "5000", "--burn_in", "500", "--reps", "10", "--seed", "6"}},
      {"tune", {"--input", data, "--sigma2", "0.25", "--kmax", "2", "--lambda_multipliers", "0.25,1,4"}},
  };
  bool ok = true;
  std::string detail;
  for (const auto& [cmd, extra] : runs) {
    const fs::path out = dir / cmd;
    std::vector<std::string> args = {cmd, "--out", out.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    std::string text;
    const int first_code = run_cli(args, &text);
    const auto first = snapshot(out);
    const int second_code = run_cli(args);
    const auto second = snapshot(out);
    const bool same = first_code == 0 && second_code == 0 && !first.empty() && first == second;
    ok = ok && same;
    detail += fmt("%s %s (%zu files); ", cmd.c_str(), same ? "identical" : "DIFFERENT", first.size());
    if (first_code != 0) detail += "exit " + std::to_string(first_code) + ": " + text + "; ";
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"prior masses", prior_masses},
      {"exact aggregate vs naive oracle", oracle_equivalence},
      {"SURE unbiasedness", sure_unbiased},
      {"oracle inequality in expectation", expectation_bound},
      {"Gibbs mean vs quadrature", gibbs_vs_quadrature},
      {"oracle inequality in probability", probability_bound},
      {"sampler invariants", sampler_invariants},
      {"CLI determinism", cli_determinism},
  };
  fs::create_directories(kWork);
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("[%s] %zu. %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
