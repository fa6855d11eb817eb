// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria (0 when all pass).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "qsd/afp.hpp"
#include "qsd/branching.hpp"
#include "qsd/conditioned_flow.hpp"
#include "qsd/fleming_viot.hpp"
#include "qsd/format.hpp"
#include "qsd/graphical.hpp"
#include "qsd/harness.hpp"
#include "qsd/model_zoo.hpp"
#include "qsd/oracle.hpp"
#include "qsd/parallel.hpp"
#include "qsd/return_process.hpp"
#include "support.hpp"

using namespace qsd;
using namespace qsd::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string data;  // canonical dump of the stochastic outputs, for the rerun check
};

class Dump {
 public:
  Dump& operator<<(double v) {
    s_ << format_double(v) << ' ';
    return *this;
  }
  Dump& operator<<(const Distribution& d) {
    for (const auto& e : d) s_ << e.state << ':' << format_double(e.mass) << ' ';
    s_ << "| ";
    return *this;
  }
  std::string str() const { return s_.str(); }

 private:
  std::ostringstream s_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double sup_norm(const ResidualVector& r) { return r.sup_norm; }

const Distribution& t2_nu() {
  static const Distribution nu = Distribution::from_weights({{1, kT2Nu1}, {2, kT2Nu2}});
  return nu;
}

// 1
Outcome fixed_point_identity() {
  double worst = 0.0;
  for (const auto& m : {two_state_model(), build_birth_death(BirthDeathSpec::constant(1, 2), 100)}) {
    const auto sol = solve_qsd_power(m, *m.num_states());
    worst = std::max(worst, sup_norm(qsd_residual(m, sol.nu)));
  }
  return {worst <= 1e-9, "sup residual " + fmt(worst) + " <= 1e-9", {}};
}

// 2
Outcome theta_identity() {
  std::vector<AbsorbedChainModel> models = {point_model(), two_state_model(),
                                            build_birth_death(BirthDeathSpec::constant(1, 2), 5),
                                            build_birth_death(BirthDeathSpec::constant(1, 2), 100),
                                            build_galton_watson({1, 2}).truncated(200)};
  double worst = 0.0;
  for (const auto& m : models) {
    const auto sol = solve_qsd_power(m, *m.num_states());
    worst = std::max({worst, std::abs(sol.theta + sol.lambda), std::abs(theta_of(m, sol.nu) + sol.lambda)});
  }
  // closed form on T2
  const auto t2 = solve_qsd_power(two_state_model(), 2);
  worst = std::max(worst, std::abs(t2.lambda - kT2Lambda));
  return {worst <= 1e-9, "max |theta + lambda|, |sum nu q(.,0) + lambda| over 5 instances = " + fmt(worst), {}};
}

// 3
Outcome conditioned_flow() {
  const auto t2 = two_state_model();
  const auto exact = t2_conditioned_law(2, 1.0);
  const auto fine = evolve_conditioned(t2, Distribution::delta(2), 1.0, 1e-3, 2).final();
  const double err = std::max(std::abs(fine.mass(1) - exact[0]), std::abs(fine.mass(2) - exact[1]));
  auto e = [&](double h) {
    return std::abs(evolve_conditioned(t2, Distribution::delta(2), 1.0, h, 2).final().mass(1) - exact[0]);
  };
  const double r1 = e(0.05) / e(0.025);
  const double r2 = e(0.025) / e(0.0125);
  const bool order = std::abs(r1 - 16.0) <= 4.0 && std::abs(r2 - 16.0) <= 4.0;
  return {err <= 1e-8 && order,
          "error vs matrix exponential " + fmt(err) + " <= 1e-8; halving ratios " + fmt(r1) + ", " + fmt(r2) +
              " (16 +- 4)",
          {}};
}

// 4
Outcome fv_fixed_time() {
  const auto t2 = two_state_model();
  ScanOptions one;
  one.particles = {400};
  one.replicas = 200;
  const auto at400 = fv_scan(t2, Distribution::delta(2), one, 4001);
  const double bound = std::exp(5.0 * *t2.bounds().column * 1.0) * 3.0 / std::sqrt(400.0);
  const double bias = at400.points[0].bias;
  ScanOptions scan;
  scan.particles = {50, 200, 800};
  scan.replicas = 200;
  const auto res = fv_scan(t2, Distribution::delta(2), scan, 4002);
  const double slope = res.fit ? res.fit->slope : 0.0;
  Dump d;
  d << bias << slope;
  for (const auto& p : res.points) d << p.mean_abs_error << p.bias;
  const bool ok = bias <= bound && res.fit && slope >= -0.65 && slope <= -0.35;
  return {ok,
          "N=400 |E m - T mu| = " + fmt(bias) + " <= " + fmt(bound) + "; slope over {50,200,800} = " + fmt(slope) +
              " in [-0.65,-0.35]",
          d.str()};
}

// 5
Outcome decorrelation() {
  const auto c = correlation_probe(two_state_model(), ParticleConfig(std::vector<State>(100, 2)), 1.0, 1, 2, 4000, 5001);
  const double bound = 2.0 * std::exp(2.0 * *two_state_model().bounds().c0) / 100.0;
  Dump d;
  d << c.covariance << c.standard_error;
  return {c.covariance <= bound + 3.0 * c.standard_error && std::abs(c.bound - bound) < 1e-15,
          "|Cov| = " + fmt(c.covariance) + " <= " + fmt(bound) + " + 3*" + fmt(c.standard_error), d.str()};
}

// 6
Outcome stationary_selection() {
  const auto gw = build_galton_watson({1, 2});
  const auto ref = minimal_qsd_reference(gw, {100, 200, 400, 800}, 1e-6);
  RngStream rng(6001);
  const auto est = fv_stationary(gw, 1000, 50.0, 550.0, rng);
  const double tv = tv_distance(est, ref.nu);
  Dump d;
  d << est;
  return {tv <= 0.05, "gw:1,2 N=1000 TV to stabilized reference (K=" + std::to_string(ref.truncation) + ") = " + fmt(tv) +
                          " <= 0.05",
          d.str()};
}

// 7
Outcome phi_fixed_point() {
  const auto t2 = two_state_model();
  const auto nu = solve_qsd_power(t2, 2).nu;
  const double fixed = tv_distance(phi_map(t2, nu), nu);
  const auto it = phi_iterate(t2, Distribution::delta(1), 100, 1e-10);
  const double tv = tv_distance(it.result, nu);
  return {fixed <= 1e-10 && tv <= 1e-8,
          "TV(Phi(nu), nu) = " + fmt(fixed) + " <= 1e-10; iterate from delta_1: TV " + fmt(tv) + " <= 1e-8 after " +
              std::to_string(it.tv_log.size()) + " steps",
          {}};
}

// 8
Outcome tagged_coupling() {
  const auto t2 = two_state_model();
  const auto& nu = t2_nu();
  const double horizon = 2.0;
  const auto path = evolve_conditioned(t2, nu, horizon, 1e-3, 2);
  const std::size_t reps = 5000;
  std::vector<double> p, se;
  bool within_bound = true;
  std::string bound_text;
  Dump d;
  for (std::size_t n : {20, 80, 320}) {
    const auto runs = run_replicas(reps, [&](std::size_t r) {
      return coupled_tagged_run(t2, nu, path, n, horizon, 0.05, 8000 + n, r);
    });
    double hits = 0.0, hits0 = 0.0;
    std::vector<double> dev(runs[0].grid.size(), 0.0);
    for (const auto& run : runs) {
      hits += run.psi;
      hits0 += run.divergence_time == 0.0;
      for (std::size_t i = 0; i < dev.size(); ++i) dev[i] += run.deviation[i] / static_cast<double>(reps);
    }
    double integral = 0.0;
    for (std::size_t i = 1; i < dev.size(); ++i) {
      integral += 0.5 * (runs[0].grid[i] - runs[0].grid[i - 1]) * (dev[i] + dev[i - 1]);
    }
    const double ph = hits / static_cast<double>(reps);
    const double rhs = hits0 / static_cast<double>(reps) + *t2.bounds().c0 * integral;
    p.push_back(ph);
    se.push_back(std::sqrt(ph * (1.0 - ph) / static_cast<double>(reps)));
    within_bound = within_bound && ph <= rhs;
    bound_text += " N=" + std::to_string(n) + ": " + fmt(ph) + "<=" + fmt(rhs);
    d << ph << rhs;
  }
  bool ordered = true;
  for (std::size_t i = 1; i < p.size(); ++i) {
    ordered = ordered && p[i - 1] - p[i] > 3.0 * std::hypot(se[i - 1], se[i]);
  }
  const auto ends = run_replicas(10'000, [&](std::size_t r) {
    RngStream rng(8001, {r});
    return simulate_tagged_limit(t2, path, nu.sample(rng), horizon, rng).at(horizon);
  });
  std::vector<double> counts(2, 0.0);
  for (State y : ends) counts[y - 1] += 1.0;
  const double pval = chi_square_gof_p(counts, {kT2Nu1, kT2Nu2});
  d << counts[0];
  return {within_bound && ordered && pval > 0.01,
          "P(psi(2)=1) vs coupling bound:" + bound_text + "; 3-SE decreasing: " + (ordered ? "yes" : "no") +
              "; Y(2) under nu chi-square p = " + fmt(pval),
          d.str()};
}

// 9
Outcome afp() {
  const auto d2 = uniformize(two_state_model(), 2.0);
  const auto nu = solve_qsd_discrete(d2).nu;
  RngStream rng(9001);
  const auto run = afp_run(d2, 1, 1'000'000, rng);
  const double tv = tv_distance(run.estimate, nu);
  const auto marks = doubling_checkpoints(1'000'000, 3);
  const auto reps = run_replicas(20, [&](std::size_t r) {
    RngStream s(9002, {r});
    return afp_run(d2, 1, 1'000'000, s, marks, nu);
  });
  std::vector<double> medians;
  Dump d;
  d << run.estimate;
  for (std::size_t c = 0; c < marks.size(); ++c) {
    std::vector<double> tvs;
    for (const auto& r : reps) tvs.push_back(*r.checkpoints[c].tv_to_reference);
    std::sort(tvs.begin(), tvs.end());
    medians.push_back(0.5 * (tvs[9] + tvs[10]));
    d << medians.back();
  }
  const bool mono = medians[1] <= medians[0] && medians[2] <= medians[1];
  return {tv <= 0.02 && mono,
          "n=1e6 TV = " + fmt(tv) + " <= 0.02; medians at 2.5e5/5e5/1e6: " + fmt(medians[0]) + ", " + fmt(medians[1]) +
              ", " + fmt(medians[2]),
          d.str()};
}

// 10
Outcome branching() {
  KsOptions opt;
  opt.alpha = 2.0;
  opt.cap = 100'000;
  opt.horizon = 15.0;
  opt.replicas = 50;
  const auto est = ks_estimate(two_state_model(), opt, 10001);
  const double tv = tv_distance(est.nu_hat, t2_nu());
  const double lambda_alpha = 2.0 + kT2Lambda;
  const double growth = est.growth_rate_fit.value_or(0.0);
  Dump d;
  d << est.nu_hat << growth << static_cast<double>(est.cap_events);
  return {tv <= 0.05 && std::abs(growth - lambda_alpha) <= 0.1,
          "TV = " + fmt(tv) + " <= 0.05; growth fit " + fmt(growth) + " vs lambda_alpha " + fmt(lambda_alpha) + " +- 0.1",
          d.str()};
}

// 11
Outcome kernel_equivalence() {
  const auto t2 = two_state_model();
  const std::vector<State> init = {1, 1, 1, 1, 2, 2, 2, 2, 2, 2};
  const auto graphical = run_replicas(2000, [&](std::size_t r) {
    GraphicalFv fv(t2, init, 11001, r);
    fv.advance_to(1.0);
    return fv.count(1);
  });
  const auto gillespie = run_replicas(2000, [&](std::size_t r) {
    RngStream rng(11002, {r});
    const auto fin = fv_final(t2, ParticleConfig(init), 1.0, rng);
    std::size_t k = 0;
    for (State x : fin.positions()) k += x == 1;
    return k;
  });
  const double pval = two_sample_chi_square_p(graphical, gillespie);
  Dump d;
  d << pval;
  return {pval > 0.01, "two-sample chi-square on m(1, xi(1)), 2000 + 2000 replicas: p = " + fmt(pval), d.str()};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
  double budget_seconds;  // 0 = informational only
  bool stochastic;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "fixed-point identity", fixed_point_identity, 1.0, false},
      {2, "three-way theta identity", theta_identity, 1.0, false},
      {3, "conditioned-flow correctness", conditioned_flow, 5.0, false},
      {4, "FV fixed-time convergence", fv_fixed_time, 0.0, true},
      {5, "decorrelation", decorrelation, 0.0, true},
      {6, "FV stationary selection", stationary_selection, 0.0, true},
      {7, "Phi fixed point and iteration", phi_fixed_point, 5.0, false},
      {8, "tagged-particle coupling", tagged_coupling, 0.0, true},
      {9, "AFP history chain", afp, 0.0, true},
      {10, "branching / Kesten-Stigum", branching, 0.0, true},
      {11, "kernel equivalence", kernel_equivalence, 0.0, true},
  };
  int failures = 0;
  std::vector<std::string> first_data(criteria.size());
  auto report = [&](int id, const char* name, bool pass, const std::string& detail, double secs) {
    std::printf("[%s] %2d %s: %s (%.2f s)\n", pass ? "PASS" : "FAIL", id, name, detail.c_str(), secs);
    std::fflush(stdout);
    if (!pass) ++failures;
  };
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what(), {}};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = o.pass;
    std::string detail = o.detail;
    if (c.budget_seconds > 0.0) {
      pass = pass && secs < c.budget_seconds;
      detail += "; runtime < " + fmt(c.budget_seconds) + " s";
    }
    report(c.id, c.name, pass, detail, secs);
    first_data[i] = o.data;
  }

  // 12: rerun every stochastic criterion with the same seeds
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<int> mismatched;
  int checked = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!criteria[i].stochastic) continue;
    ++checked;
    std::string again;
    try {
      again = criteria[i].run().data;
    } catch (const std::exception&) {
      again = "<threw>";
    }
    if (again.empty() || again != first_data[i]) mismatched.push_back(criteria[i].id);
  }
  std::string detail = std::to_string(checked) + " stochastic criteria rerun, ";
  if (mismatched.empty()) {
    detail += "all outputs byte-identical";
  } else {
    detail += "mismatch in";
    for (int id : mismatched) detail += " " + std::to_string(id);
  }
  report(12, "reproducibility", mismatched.empty(),
         detail, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

  std::printf("%d of 12 criteria passed\n", 12 - failures);
  return failures;
}
