// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tmilstein/brownian.hpp"
#include "tmilstein/config.hpp"
#include "tmilstein/experiments.hpp"
#include "tmilstein/runner.hpp"

using namespace tmil;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void note(const std::string& text) {
  std::printf("  info: %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) { return format_double(v); }

TruncationConfig damped_cfg() { return TruncationConfig::power_law({83.0, 3.0}, {1.0, 0.1}, 1.0); }
TruncationConfig cubic_quintic_cfg() { return TruncationConfig::power_law({4.0, 5.0}, {4.0, 0.1}, 4.0); }
TruncationConfig stable_cfg() { return TruncationConfig::power_law({4.0, 5.0}, {4.0, 0.25}, 4.0); }

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void criterion_1() {
  const auto t0 = Clock::now();
  const auto c = compare_step_conditions(damped_cfg(), 1.0, 42.0, 4.0);
  const double secs = seconds_since(t0);
  const double expected_log = -410.0 / 17.0 * std::log(83.0);
  const double rel = std::abs(std::expm1(c.old_threshold.log_delta - expected_log));
  std::ostringstream d;
  d << "old_threshold = " << fmt(c.old_threshold.delta) << " (83^(-410/17) = " << fmt(std::exp(expected_log))
    << ", rel err " << fmt(rel) << "), new_threshold = " << fmt(c.new_threshold) << ", " << secs << " s";
  report(1, rel < 1e-6 && c.new_threshold == 1.0 && secs < 1.0, d.str());
}

void criterion_2() {
  const auto t0 = Clock::now();
  const auto c = compare_step_conditions(damped_cfg(), 1.0, 42.0, 4.0);
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "dominant_rate = " << c.exponents.dominant.str() << " = " << fmt(c.dominant_rate) << " (discretization "
    << c.exponents.discretization.str() << ", truncation " << c.exponents.truncation.str() << "), " << secs << " s";
  report(2, c.exponents.dominant == Rational(8, 5) && c.dominant_rate == 1.6 && secs < 1.0, d.str());
}

RateExperimentSpec convergence_spec() {
  RateExperimentSpec spec;
  spec.model = builtin_model(BuiltinModel::cubic_quintic);
  spec.truncation = cubic_quintic_cfg();
  spec.scheme = SchemeId::truncated_milstein;
  spec.q = 1.0;
  spec.t_final = 1.28;
  spec.delta_ref = 0.01 / 8.0;
  for (int i = 1; i <= 6; ++i) spec.test_steps.push_back(0.01 * std::ldexp(1.0, i));
  spec.n_paths = 1000;
  spec.master_seed = 20240101;
  spec.workers = 1;
  return spec;
}

void criterion_3() {
  const auto t0 = Clock::now();
  RateExperimentSpec spec = convergence_spec();
  const RateFit fit = run_rate_experiment(spec);
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "terminal L2 error slope = " << fmt(fit.slope) << " (se " << fmt(fit.slope_se) << ", window [0.8, 1.2], se < 0.1), "
    << fit.n_paths << " paths, T = " << fmt(spec.t_final) << ", " << secs << " s";
  report(3, fit.slope >= 0.8 && fit.slope <= 1.2 && fit.slope_se < 0.1, d.str());
  for (const auto& p : fit.points)
    note("delta " + fmt(p.delta) + ": (E|e|^2)^(1/2) = " + fmt(p.error_norm) + " +- " + fmt(p.error_norm_se));
  note("moment slope of E|e|^2 = " + fmt(fit.moment_slope) + " (se " + fmt(fit.moment_slope_se) + ")");

  // Same ensemble, error measured as the maximum over shared knots (not the criterion's metric).
  spec.error_norm = ErrorNorm::sup;
  const RateFit sup = run_rate_experiment(spec);
  note("sup-over-knots L2 error slope = " + fmt(sup.slope) + " (se " + fmt(sup.slope_se) + ")");
}

void criterion_4() {
  const auto c =
      compute_stability_constants(builtin_model(BuiltinModel::stable_quintic), stable_cfg(), KFunction{2.0, 2.0});
  std::ostringstream d;
  d << "omega^-1(h(1)) = " << fmt(c.radius) << "; computed H = " << fmt(c.H) << " at |x| = " << fmt(c.H_argmax)
    << ", delta_1 = " << fmt(c.delta_1);
  const bool has_published = c.published_H.has_value() && c.published_delta_1.has_value();
  if (has_published) d << "; published H = " << fmt(*c.published_H) << ", delta_1 = " << fmt(*c.published_delta_1);
  d << "; discrepancy flagged = " << (c.differs_from_published ? "yes" : "no");
  report(4, c.radius == 1.0 && has_published && c.differs_from_published, d.str());
}

void criterion_5() {
  const auto t0 = Clock::now();
  const SdeModel m = builtin_model(BuiltinModel::stable_quintic);
  const auto constants = compute_stability_constants(m, stable_cfg(), KFunction{2.0, 2.0});
  StabilityEnsembleSpec spec;
  spec.delta = 0.04;
  spec.horizon_steps = 1000;
  spec.n_paths = 1000;
  spec.tol_stab = 1e-2;
  spec.master_seed = 20240102;
  spec.delta_1 = constants.delta_1;
  const auto d = run_stability_ensemble(m, stable_cfg(), spec);
  const double secs = seconds_since(t0);
  std::ostringstream s;
  s << "decay_fraction = " << fmt(d.decay_fraction) << " over " << spec.n_paths << " paths (delta 0.04, T 40, tol 1e-2), "
    << d.blowups << " blow-ups, " << secs << " s";
  report(5, d.decay_fraction >= 0.95 && secs < 60.0, s.str());
  if (d.warning) note(*d.warning);
}

bool projection_suite(std::string& detail) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> logr(-3.0, 3.0);
  bool ok = true;
  for (std::size_t dim : {1u, 2u, 5u}) {
    const double radius = 1.3;
    for (int i = 0; i < 10000; ++i) {
      Vec x(dim), y(dim);
      for (auto* v : {&x, &y}) {
        for (double& c : *v) c = gauss(rng);
        const double s = std::pow(10.0, logr(rng)) / norm(*v);
        for (double& c : *v) c *= s;
      }
      const Vec px = project_onto_ball(radius, x);
      const Vec py = project_onto_ball(radius, y);
      Vec dp(dim), dx(dim);
      for (std::size_t k = 0; k < dim; ++k) {
        dp[k] = px[k] - py[k];
        dx[k] = x[k] - y[k];
      }
      ok = ok && project_onto_ball(radius, px) == px && norm(px) <= radius * (1.0 + 1e-12) &&
           (norm(x) >= radius || px == x) && norm(dp) <= norm(dx) * (1.0 + 1e-12) + 1e-12;
    }
  }
  detail = "projection idempotent/ball/non-expansive on 3 x 10^4 pairs";
  return ok;
}

bool coefficient_bound_suite(std::string& detail) {
  struct Case {
    BuiltinModel model;
    TruncationConfig cfg;
  };
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> logx(-3.0, 6.0);
  bool ok = true;
  std::ostringstream d;
  d << "max |coefficient| / h(delta) over 10^4 points up to |x| = 1e6:";
  for (const auto& c : {Case{BuiltinModel::cubic_quintic, cubic_quintic_cfg()},
                        Case{BuiltinModel::strongly_damped_cubic, damped_cfg()},
                        Case{BuiltinModel::stable_quintic, stable_cfg()}}) {
    const SdeModel m = builtin_model(c.model);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double x = (i % 2 ? 1.0 : -1.0) * std::pow(10.0, logx(rng));
      for (double delta : {1.0, 0.1, 1e-3}) {
        const auto b = truncated_coeffs(m, c.cfg, delta, Vec{x});
        const double mx =
            std::max({std::abs(b.drift[0]), std::abs(b.diffusion[0][0]), std::abs(b.l_term(0, 0)[0])});
        worst = std::max(worst, mx / c.cfg.h(delta));
      }
    }
    const bool pass = worst <= 1.0 + 1e-12;
    ok = ok && pass;
    d << " " << m.name << " " << fmt(worst) << (pass ? "" : " (exceeds h)");
  }
  detail = d.str();
  return ok;
}

bool classical_equivalence_suite(std::string& detail) {
  const SdeModel m = builtin_model(BuiltinModel::cubic_quintic);
  const TruncationConfig cfg = cubic_quintic_cfg();
  bool ok = true;
  std::size_t n = 0;
  for (double delta : {1.0, 0.1, 0.01}) {
    const double r = cfg.radius(delta);
    for (int i = -100; i <= 100; ++i)
      for (double db : {-0.3, 0.0, 0.2}) {
        const Vec y{r * i / 100.0};
        ok = ok && step(SchemeId::classical_milstein, m, cfg, delta, y, Vec{db}) ==
                       step(SchemeId::truncated_milstein, m, cfg, delta, y, Vec{db});
        ok = ok && step(SchemeId::classical_em, m, cfg, delta, y, Vec{db}) ==
                       step(SchemeId::truncated_em, m, cfg, delta, y, Vec{db});
        ++n;
      }
  }
  detail = "classical == truncated inside the ball at " + std::to_string(n) + " states";
  return ok;
}

bool coarsening_suite(std::string& detail) {
  bool ok = true;
  for (std::uint64_t p = 0; p < 20; ++p) {
    const auto g = BrownianGrid::generate(3, p, 2, 1.28, 1024);
    const auto a = g.coarsen(2).coarsen(2);
    const auto b = g.coarsen(4);
    ok = ok && std::equal(a.increments().begin(), a.increments().end(), b.increments().begin());
    ok = ok && g.coarsen(1024).terminal_value() == g.terminal_value();
    ok = ok && g.coarsen(512).coarsen(2).terminal_value() == g.terminal_value();
    const auto c = BrownianGrid::generate(3, p, 2, 1.28, 1024);
    ok = ok && std::equal(g.increments().begin(), g.increments().end(), c.increments().begin());
  }
  detail = "coarsening exact (2 then 2 == 4, B(T) invariant, regeneration bit-exact)";
  return ok;
}

bool moment_suite(std::string& detail) {
  std::vector<double> deltas;
  for (int i = 4; i <= 10; ++i) deltas.push_back(std::ldexp(1.0, -i));
  const auto pts = moment_probe(builtin_model(BuiltinModel::cubic_quintic), cubic_quintic_cfg(),
                                SchemeId::truncated_milstein, deltas, 10000, 1.0, 4.0, 3, 1);
  double worst = 0.0;
  for (const auto& p : pts) worst = std::max(worst, p.moment);
  detail = "max E|Y_N|^4 over delta = 2^-4..2^-10 (10^4 paths) = " + fmt(worst) + " (cap 1e3)";
  return worst < 1e3;
}

bool preservation_suite(std::string& detail) {
  bool ok = true;
  std::ostringstream d;
  d << "preservation margins (p_bar = 2):";
  for (auto id : {BuiltinModel::cubic_quintic, BuiltinModel::strongly_damped_cubic, BuiltinModel::stable_quintic}) {
    const TruncationConfig cfg = id == BuiltinModel::cubic_quintic ? cubic_quintic_cfg()
                                 : id == BuiltinModel::strongly_damped_cubic ? damped_cfg()
                                                                             : stable_cfg();
    double worst = -std::numeric_limits<double>::infinity();
    for (double delta : {1.0, 0.1, 1e-3}) {
      const auto r = preservation_probe(builtin_model(id), cfg, delta, 2.0, 2000, 4.0, 1e6);
      worst = std::max(worst, r.worst_margin);
    }
    ok = ok && worst <= 0.0;
    d << " " << to_string(id) << " " << fmt(worst);
  }
  detail = d.str();
  return ok;
}

bool blowup_suite(std::string& detail) {
  SdeModel m = builtin_model(BuiltinModel::cubic_quintic);
  m.initial_value = {3.0};
  const auto grid = BrownianGrid::generate(4, 0, 1, 5.0, 20);
  const Trajectory em = simulate(SchemeId::classical_em, m, cubic_quintic_cfg(), grid, 1);
  const Trajectory tm = simulate(SchemeId::truncated_milstein, m, cubic_quintic_cfg(), grid, 1);
  detail = "classical EM at delta 0.25 from x0 = 3 blew up at step " + std::to_string(em.blowup_index) +
           "; truncated Milstein finite = " + (tm.blew_up ? "no" : "yes");
  return em.blew_up && !tm.blew_up;
}

void criterion_6() {
  struct Suite {
    const char* name;
    bool (*fn)(std::string&);
  };
  const Suite suites[] = {{"projection", projection_suite},
                          {"coefficient bound", coefficient_bound_suite},
                          {"classical equivalence", classical_equivalence_suite},
                          {"coarsening", coarsening_suite},
                          {"moment cap", moment_suite},
                          {"preservation", preservation_suite},
                          {"EM blow-up", blowup_suite}};
  bool all = true;
  std::vector<std::string> lines;
  std::string failed;
  for (const auto& s : suites) {
    std::string detail;
    const bool ok = s.fn(detail);
    all = all && ok;
    if (!ok) failed += std::string(failed.empty() ? "" : ", ") + s.name;
    lines.push_back(std::string(ok ? "ok   " : "FAIL ") + s.name + ": " + detail);
  }
  report(6, all, all ? "all property suites hold" : "failing suites: " + failed);
  for (const auto& l : lines) note(l);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string data_rows(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line))
    if (line.empty() || line[0] != '#') out += line + "\n";
  return out;
}

void criterion_7() {
  const fs::path root = fs::temp_directory_path() / ("tmilstein-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string trunc5 = "[truncation]\nomega.coeff = 4\nomega.power = 5\nh.coeff = 4\n";
  const std::vector<std::pair<std::string, std::string>> configs = {
      {"rates.csv", "kind = rate\nmodel.name = cubic_quintic\npaths = 200\nseed = 11\n" + trunc5 +
                        "h.power = 0.1\nh_bar = 4\n[rate]\nsteps = 0.02, 0.04, 0.08, 0.16, 0.32, 0.64\n"},
      {"stability.csv", "kind = stability\nmodel.name = stable_quintic\npaths = 200\nseed = 12\n" + trunc5 +
                            "h.power = 0.25\nh_bar = 4\n[stability]\ndelta = 0.04\nhorizon = 40\nk.coeff = 2\n"
                            "k.power = 2\nrecord_paths = 200\n"},
      {"checks.csv", "kind = check\nmodel.name = stable_quintic\n[check]\nassumptions = A4_1_dissipative, "
                     "Eq4_3_ratioBounded\nk_coeff = 2\nk_power = 2\n"},
  };
  bool ok = true;
  std::ostringstream d;
  for (const auto& [file, text] : configs) {
    std::vector<std::string> outputs;
    for (std::size_t workers : {1u, 4u, 1u}) {
      ConfigOverrides o;
      o.workers = workers;
      o.out = (root / (file + std::to_string(outputs.size()))).string();
      const RunConfig cfg = validate_config(parse_config_text(text), o);
      run_experiment(cfg);
      outputs.push_back(slurp(fs::path(*o.out) / file));
    }
    const bool same = !data_rows(outputs[0]).empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
    ok = ok && same;
    d << file << (same ? " identical" : " DIFFERS") << "; ";
  }
  fs::remove_all(root);
  d << "workers 1, 4 and a rerun at 1";
  report(7, ok, d.str());
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  for (auto* fn : {criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7}) {
    try {
      fn();
    } catch (const std::exception& e) {
      std::printf("criterion raised: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criterion failure(s), %.1f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
