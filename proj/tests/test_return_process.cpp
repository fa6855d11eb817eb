#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "qsd/error.hpp"
#include "qsd/fleming_viot.hpp"
#include "qsd/graphical.hpp"
#include "qsd/model_zoo.hpp"
#include "qsd/oracle.hpp"
#include "qsd/parallel.hpp"
#include "qsd/return_process.hpp"
#include "support.hpp"

using namespace qsd;
using namespace qsd::testing;

namespace {

const Distribution kT2Nu = Distribution::from_weights({{1, kT2Nu1}, {2, kT2Nu2}});

// Invariant law of the mu-return generator, solved densely from the balance
// equations with one row replaced by the normalization.
std::vector<double> dense_return_invariant(const AbsorbedChainModel& m, const Distribution& mu) {
  const auto n = static_cast<Eigen::Index>(*m.num_states());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const Row r = m.row(static_cast<State>(x + 1));
    for (const Jump& j : r.jumps) g(x, j.to - 1) += j.rate;
    for (const auto& e : mu) g(x, e.state - 1) += r.absorb * e.mass;
    g(x, x) = 0.0;
    g(x, x) = -g.row(x).sum();
  }
  Eigen::MatrixXd a = g.transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b[n - 1] = 1.0;
  const Eigen::VectorXd pi = a.fullPivLu().solve(b);
  return {pi.data(), pi.data() + n};
}

std::vector<double> counts_of(const std::vector<State>& xs, std::size_t k) {
  std::vector<double> c(k, 0.0);
  for (State x : xs) c[x - 1] += 1.0;
  return c;
}

}  // namespace

TEST_CASE("return rates") {
  const ReturnRates rr(two_state_model(), kT2Nu);
  const auto r1 = rr.row(1);
  REQUIRE(r1.size() == 1);
  CHECK(r1[0].to == 2);
  CHECK(r1[0].rate == doctest::Approx(1.0 + kT2Nu2));
  const auto r2 = rr.row(2);
  REQUIRE(r2.size() == 1);
  CHECK(r2[0].rate == 1.0);

  const auto path = evolve_conditioned(two_state_model(), kT2Nu, 1.0, 1e-3, 2);
  const TimeDepReturnRates td(two_state_model(), path);
  CHECK(td.row(1, 0.5)[0].rate == doctest::Approx(r1[0].rate).epsilon(1e-9));
}

TEST_CASE("mu-return occupation") {
  RngStream rng(11);
  CHECK(simulate_mu_return(point_model(), Distribution::delta(1), 50.0, rng).occupation ==
        Distribution::delta(1));
  const auto a = simulate_mu_return(two_state_model(), Distribution::delta(1), 1e4, rng);
  CHECK(std::abs(a.occupation.mass(1) - 0.5) < 0.01);
  CHECK(a.trajectory.null_events > 0);
  const auto b = simulate_mu_return(two_state_model(), kT2Nu, 1e4, rng);
  CHECK(tv_distance(b.occupation, kT2Nu) < 0.01);
  RngStream small(1);
  CHECK_THROWS_AS(simulate_mu_return(two_state_model(), kT2Nu, 1e4, small, 100), Error);
}

TEST_CASE("phi map: exact solve") {
  CHECK(phi_map(point_model(), Distribution::delta(1)) == Distribution::delta(1));
  const auto half = phi_map(two_state_model(), Distribution::delta(1));
  CHECK(half.mass(1) == doctest::Approx(0.5).epsilon(1e-14));
  const auto nu = solve_qsd_power(two_state_model(), 2).nu;
  CHECK(tv_distance(phi_map(two_state_model(), nu), nu) < 1e-10);
  CHECK(return_stationarity_residual(two_state_model(), nu, nu) < 1e-10);

  // random finite chains against a dense balance-equation solve
  RngStream rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + rng.below(8);
    std::vector<std::vector<double>> rates(k, std::vector<double>(k, 0.0));
    std::vector<double> absorb(k, 0.0);
    for (std::size_t x = 0; x < k; ++x) {
      rates[x][(x + 1) % k] = 0.1 + rng.uniform();
      for (std::size_t y = 0; y < k; ++y) {
        if (y != x && rng.uniform() < 0.3) rates[x][y] += rng.uniform();
      }
      if (rng.uniform() < 0.5) absorb[x] = rng.uniform();
    }
    absorb[0] += 0.2;
    const auto m = build_finite(rates, absorb, "random");
    std::vector<double> w(k);
    for (double& v : w) v = rng.uniform();
    const auto mu = Distribution::from_dense(w);
    const auto pi = phi_map(m, mu);
    const auto expect = dense_return_invariant(m, mu);
    for (std::size_t x = 0; x < k; ++x) CHECK(std::abs(pi.mass(x + 1) - expect[x]) < 1e-10);
    CHECK(return_stationarity_residual(m, mu, pi) < 1e-10);
  }
}

TEST_CASE("phi map: reducible return chain") {
  // state 3 feeds 1 but nothing reaches 3
  std::vector<std::vector<double>> rates = {{0, 1, 0}, {1, 0, 0}, {1, 0, 0}};
  const auto m = build_finite(rates, {1, 0, 0}, "reducible");
  CHECK_THROWS_WITH_AS(phi_map(m, Distribution::delta(1)), doctest::Contains("reducible"), Error);
  CHECK_NOTHROW(phi_map(m, Distribution::delta(3)));
}

TEST_CASE("phi map: large models fall back to simulation") {
  const auto m = build_birth_death(BirthDeathSpec::constant(1, 2), 50, "bd");
  PhiOptions opt;
  opt.direct_limit = 10;
  opt.fallback_horizon = 2e4;
  const auto sim = phi_map(m, Distribution::delta(1), opt);
  const auto exact = phi_map(m, Distribution::delta(1));
  CHECK(tv_distance(sim, exact) < 0.03);
}

TEST_CASE("phi iteration") {
  const auto p = phi_iterate(point_model(), Distribution::delta(1), 10, 1e-12);
  CHECK(p.converged);
  CHECK(p.tv_log.size() == 1);

  const auto nu = solve_qsd_power(two_state_model(), 2).nu;
  for (const auto& start : {Distribution::delta(1), Distribution::uniform(std::vector<State>{1, 2})}) {
    const auto it = phi_iterate(two_state_model(), start, 60, 1e-10);
    CHECK(it.converged);
    CHECK(tv_distance(it.result, nu) < 1e-8);
    for (std::size_t i = 5; i < it.tv_log.size(); ++i) CHECK(it.tv_log[i] <= it.tv_log[i - 1] + 1e-12);
    MESSAGE("iterations: " << it.tv_log.size());
  }

  const auto short_run = phi_iterate(two_state_model(), Distribution::delta(1), 2, 1e-14);
  CHECK_FALSE(short_run.converged);
  CHECK(short_run.tv_log.size() == 2);
}

TEST_CASE("path law sampling") {
  const auto path = evolve_conditioned(two_state_model(), Distribution::delta(2), 1.0, 1e-2, 2);
  std::vector<double> law;
  path.dense_at(0.37, law);
  CHECK(sample_path_law(path, 0.37, law[0] * 0.999) == 1);
  CHECK(sample_path_law(path, 0.37, law[0] * 1.001) == 2);
  CHECK(sample_path_law(path, 0.0, 0.0) == 2);
  CHECK_THROWS_AS(sample_path_law(path, 1.5, 0.5), Error);
}

TEST_CASE("tagged limit: marginals") {
  const auto t2 = two_state_model();
  CHECK_THROWS_AS(
      [&] {
        const auto path = evolve_conditioned(t2, kT2Nu, 1.0, 1e-2, 2);
        RngStream rng(1);
        simulate_tagged_limit(t2, path, 1, 2.0, rng);
      }(),
      Error);

  {
    const auto path = evolve_conditioned(point_model(), Distribution::delta(1), 3.0, 1e-2, 1);
    RngStream rng(3);
    const auto y = simulate_tagged_limit(point_model(), path, 1, 3.0, rng);
    CHECK(y.states.size() == 1);
    CHECK(y.null_events == y.events);
  }

  // stationary path: marginal stays nu
  const auto nu_path = evolve_conditioned(t2, kT2Nu, 2.0, 1e-3, 2);
  const auto sample_end = [&](const ConditionedPath& path, const Distribution& mu, double t,
                              std::uint64_t seed) {
    return run_replicas(10'000, [&](std::size_t r) {
      RngStream rng(seed, {r});
      const State y0 = mu.sample(rng);
      return simulate_tagged_limit(t2, path, y0, t, rng).at(t);
    });
  };
  const auto ends = sample_end(nu_path, kT2Nu, 2.0, 21);
  CHECK(chi_square_gof_p(counts_of(ends, 2), {kT2Nu1, kT2Nu2}) > 0.01);

  const auto d2_path = evolve_conditioned(t2, Distribution::delta(2), 1.0, 1e-3, 2);
  const auto ends2 = sample_end(d2_path, Distribution::delta(2), 1.0, 22);
  CHECK(chi_square_gof_p(counts_of(ends2, 2), t2_conditioned_law(2, 1.0)) > 0.01);
}

TEST_CASE("tagged limit refuses an unbounded absorption rate") {
  const auto lazy = AbsorbedChainModel::lazy(
      [](State x, Row& r) {
        r.jumps = {{x + 1, 1.0}};
        r.absorb = static_cast<double>(x);
      },
      "growing-kill", Bounds{kInfinity, 1.0, kInfinity});
  const auto path = evolve_conditioned(two_state_model(), kT2Nu, 1.0, 1e-2, 2);
  RngStream rng(1);
  CHECK_THROWS_WITH_AS(simulate_tagged_limit(lazy, path, 1, 0.5, rng), doctest::Contains("C0"), Error);
}

TEST_CASE("mark streams") {
  MarkStream s(2.0, 0.5, RngStream(1, {1}), RngStream(1, {2}));
  double last = 0.0;
  int internal = 0, voter = 0;
  while (s.peek().time <= 2000.0) {
    const Mark m = s.pop();
    CHECK(m.time > last);
    last = m.time;
    (m.voter ? voter : internal)++;
  }
  CHECK(std::abs(internal - 4000) < 4 * std::sqrt(4000.0));
  CHECK(std::abs(voter - 1000) < 4 * std::sqrt(1000.0));
  MarkStream silent(0.0, 0.0, RngStream(1, {1}), RngStream(1, {2}));
  CHECK(std::isinf(silent.peek().time));
}

TEST_CASE("graphical FV: point chain and guards") {
  GraphicalFv fv(point_model(), {1, 1, 1}, 1, 0);
  fv.advance_to(10.0);
  CHECK(fv.empirical() == Distribution::delta(1));
  CHECK(fv.events() > 0);

  const auto gw = build_galton_watson({1, 2});
  const auto path = evolve_conditioned(two_state_model(), kT2Nu, 1.0, 1e-2, 2);
  CHECK_THROWS_WITH_AS(coupled_tagged_run(gw, Distribution::delta(1), path, 10, 1.0, 0.1, 1, 0),
                       doctest::Contains("qbar"), Error);
  CHECK_THROWS_AS(coupled_tagged_run(two_state_model(), kT2Nu, path, 10, 2.0, 0.1, 1, 0), Error);
}

TEST_CASE("graphical and Gillespie FV kernels agree") {
  const auto t2 = two_state_model();
  const std::size_t n = 5;
  const ParticleConfig init({1, 1, 2, 2, 2});
  const auto graphical = run_replicas(2000, [&](std::size_t r) {
    std::vector<State> pos(init.positions().begin(), init.positions().end());
    GraphicalFv fv(t2, pos, 31, r);
    fv.advance_to(1.0);
    return fv.count(1);
  });
  const auto gillespie = run_replicas(2000, [&](std::size_t r) {
    RngStream rng(32, {r});
    const auto c = fv_final(t2, init, 1.0, rng);
    std::size_t k = 0;
    for (State x : c.positions()) k += x == 1;
    return k;
  });
  CHECK(two_sample_chi_square_p(graphical, gillespie) > 0.01);
  (void)n;
}

TEST_CASE("coupled tagged runs") {
  const auto t2 = two_state_model();
  const auto path = evolve_conditioned(t2, kT2Nu, 2.0, 1e-3, 2);

  const auto point_path = evolve_conditioned(point_model(), Distribution::delta(1), 2.0, 1e-2, 1);
  for (std::uint64_t r = 0; r < 20; ++r) {
    const auto run = coupled_tagged_run(point_model(), Distribution::delta(1), point_path, 4, 2.0, 0.5, 3, r);
    CHECK_FALSE(run.psi);
  }

  const auto runs = run_replicas(2000, [&](std::size_t r) {
    return coupled_tagged_run(t2, kT2Nu, path, 20, 2.0, 0.1, 4, r);
  });
  std::vector<State> limit_end;
  for (const auto& run : runs) {
    // before divergence the two trajectories coincide
    const double stop = std::min(run.divergence_time, 2.0);
    for (double s : run.tagged.times) {
      if (s < stop) CHECK(run.tagged.at(s) == run.limit.at(s));
    }
    for (double s : run.limit.times) {
      if (s < stop) CHECK(run.tagged.at(s) == run.limit.at(s));
    }
    CHECK(run.psi == (run.divergence_time <= 2.0));
    CHECK(run.grid.size() == 21);
    limit_end.push_back(run.limit.at(2.0));
  }
  // the coupled limit keeps the nu marginal
  CHECK(chi_square_gof_p(counts_of(limit_end, 2), {kT2Nu1, kT2Nu2}) > 0.01);
}
