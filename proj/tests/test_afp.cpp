#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "qsd/afp.hpp"
#include "qsd/error.hpp"
#include "qsd/oracle.hpp"
#include "qsd/parallel.hpp"
#include "support.hpp"

using namespace qsd;
using namespace qsd::testing;

TEST_CASE("history bookkeeping") {
  AfpHistory h(3, 2);
  CHECK(h.total() == 1);
  CHECK(h.history_at(0) == 2);
  h.record(1);
  h.record(3);
  h.record(3);
  CHECK(h.total() == 4);
  CHECK(h.walker() == 3);
  CHECK(h.history_at(0) == 1);
  CHECK(h.history_at(1) == 2);
  CHECK(h.history_at(2) == 3);
  CHECK(h.history_at(3) == 3);
  CHECK(h.estimate().mass(3) == 0.5);
  CHECK_THROWS_AS(AfpHistory(3, 4), Error);
}

TEST_CASE("history mass guard") {
  AfpHistory h(1, 1, AfpHistory::kMassLimit - 1);
  h.record(1);
  CHECK(h.total() == AfpHistory::kMassLimit);
  CHECK_THROWS_WITH_AS(h.record(1), doctest::Contains("2^62"), Error);
}

TEST_CASE("point chain stays at 1") {
  const auto d = uniformize(point_model());
  RngStream rng(1);
  const auto run = afp_run(d, 1, 1000, rng);
  CHECK(run.estimate == Distribution::delta(1));
}

TEST_CASE("one-step kernel on the two-state chain") {
  const auto d = uniformize(two_state_model(), 2.0);
  std::vector<double> from1(2, 0.0), from2(2, 0.0);
  for (std::uint64_t r = 0; r < 20000; ++r) {
    RngStream rng(2, {r});
    AfpHistory h1(2, 1);
    from1[afp_step(h1, d, rng) - 1] += 1;
    CHECK(h1.total() == 2);
    AfpHistory h2(2, 2);
    h2.record(1);
    h2.record(2);  // arbitrary history, walker back at 2
    from2[afp_step(h2, d, rng) - 1] += 1;
  }
  CHECK(chi_square_gof_p(from1, {0.5, 0.5}) > 0.001);
  CHECK(chi_square_gof_p(from2, {0.5, 0.5}) > 0.001);
}

TEST_CASE("mass bookkeeping and determinism") {
  const auto d = uniformize(two_state_model(), 2.0);
  RngStream a(5), b(5);
  AfpHistory h(2, 1);
  for (int i = 0; i < 1000; ++i) {
    afp_step(h, d, a);
    REQUIRE(h.total() == static_cast<std::uint64_t>(i) + 2);
  }
  const auto r1 = afp_run(d, 1, 5000, b, {100, 1000});
  RngStream c(5);
  const auto r2 = afp_run(d, 1, 5000, c, {100, 1000});
  CHECK(r1.estimate == r2.estimate);
  CHECK(r1.checkpoints.size() == 2);
}

TEST_CASE("convergence to the discrete QSD") {
  const auto t2 = uniformize(two_state_model(), 2.0);
  const auto nu = solve_qsd_discrete(t2).nu;
  CHECK(nu.mass(1) == doctest::Approx(0.38197).epsilon(1e-4));
  RngStream rng(7);
  CHECK(tv_distance(afp_run(t2, 1, 1'000'000, rng).estimate, nu) <= 0.02);

  const auto bd = uniformize(build_birth_death(BirthDeathSpec::constant(1, 2), 5));
  const auto nu_bd = solve_qsd_discrete(bd).nu;
  RngStream rng2(8);
  CHECK(tv_distance(afp_run(bd, 1, 1'000'000, rng2).estimate, nu_bd) <= 0.02);
}

TEST_CASE("medians of the error shrink with n") {
  const auto d = uniformize(build_birth_death(BirthDeathSpec::constant(1, 2), 5));
  const auto nu = solve_qsd_discrete(d).nu;
  const auto marks = doubling_checkpoints(40000, 3);
  REQUIRE(marks == std::vector<std::uint64_t>{10000, 20000, 40000});
  const auto runs = run_replicas(20, [&](std::size_t r) {
    RngStream rng(9, {r});
    return afp_run(d, 1, 40000, rng, marks, nu);
  });
  std::vector<double> medians;
  for (std::size_t c = 0; c < marks.size(); ++c) {
    std::vector<double> tv;
    for (const auto& run : runs) tv.push_back(*run.checkpoints[c].tv_to_reference);
    std::nth_element(tv.begin(), tv.begin() + 10, tv.end());
    medians.push_back(tv[10]);
  }
  MESSAGE("medians " << medians[0] << " " << medians[1] << " " << medians[2]);
  CHECK(medians[1] <= medians[0]);
  CHECK(medians[2] <= medians[1]);
}
