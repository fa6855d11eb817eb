#include "doctest.h"
#include "qsd/conditioned_flow.hpp"
#include "qsd/error.hpp"
#include "qsd/model_zoo.hpp"
#include "qsd/oracle.hpp"
#include "support.hpp"

using namespace qsd;
using namespace qsd::testing;

TEST_CASE("power oracle on the closed-form instances") {
  const auto s1 = solve_qsd_power(point_model(), 1);
  CHECK(s1.nu.mass(1) == 1.0);
  CHECK(s1.lambda == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(s1.theta == doctest::Approx(1.0).epsilon(1e-12));

  const auto s2 = solve_qsd_power(two_state_model(), 2);
  CHECK(std::abs(s2.nu.mass(1) - kT2Nu1) < 1e-10);
  CHECK(std::abs(s2.nu.mass(2) - kT2Nu2) < 1e-10);
  CHECK(std::abs(s2.lambda - kT2Lambda) < 1e-10);
  CHECK(s2.residual <= 1e-9);
}

TEST_CASE("three-way theta identity and residual on finite instances") {
  std::vector<AbsorbedChainModel> models{point_model(), two_state_model(),
                                         build_birth_death(BirthDeathSpec::constant(1, 2), 100),
                                         build_birth_death(BirthDeathSpec::constant(1, 2), 5)};
  models.push_back(build_galton_watson({1.0, 2.0}).truncated(200));
  for (const auto& m : models) {
    const auto s = solve_qsd_power(m, *m.num_states());
    INFO(m.name());
    CHECK(std::abs(s.theta + s.lambda) <= 1e-12);
    CHECK(std::abs(s.theta - theta_of(m, s.nu)) <= 1e-9);
    CHECK(s.residual <= 1e-9);
  }
}

TEST_CASE("iteration gap decreases on the two-state chain") {
  PowerOptions opt;
  opt.keep_gap_log = true;
  const auto s = solve_qsd_power(two_state_model(), 2, opt);
  REQUIRE(s.gap_log.size() > 3);
  for (std::size_t i = 1; i < s.gap_log.size(); ++i) {
    if (s.gap_log[i - 1] > 1e-14) CHECK(s.gap_log[i] <= s.gap_log[i - 1]);
  }
}

TEST_CASE("power oracle errors") {
  auto reducible = build_finite({{0.0, 1.0}, {0.0, 0.0}}, {0.0, 1.0});
  try {
    solve_qsd_power(reducible, 2);
    FAIL("expected NotIrreducible");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotIrreducible);
  }
  PowerOptions few;
  few.max_iters = 3;
  try {
    solve_qsd_power(build_birth_death(BirthDeathSpec::constant(1, 2), 50), 50, few);
    FAIL("expected NoConvergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoConvergence);
  }
}

TEST_CASE("discrete oracle") {
  const auto s = solve_qsd_discrete(uniformize(two_state_model(), 2.0));
  CHECK(std::abs(s.nu.mass(1) - kT2Nu1) < 1e-10);
  CHECK(std::abs(s.lambda - (1.0 + kT2Lambda / 2.0)) < 1e-10);
  CHECK(s.lambda == doctest::Approx(0.80902).epsilon(1e-5));
  CHECK(s.residual <= 1e-10);

  DiscreteChainModel single;
  single.rows = {{{1, 0.5}}};
  single.kill = {0.5};
  const auto s1 = solve_qsd_discrete(single);
  CHECK(s1.nu.mass(1) == 1.0);
  CHECK(s1.lambda == doctest::Approx(0.5).epsilon(1e-14));

  DiscreteChainModel cycle;
  cycle.rows = {{{2, 0.5}}, {{1, 1.0}}};
  cycle.kill = {0.5, 0.0};
  CHECK(period(cycle) == 2);
  try {
    solve_qsd_discrete(cycle);
    FAIL("expected NoConvergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoConvergence);
  }

  DiscreteChainModel split;
  split.rows = {{{1, 0.5}}, {{2, 0.5}}};
  split.kill = {0.5, 0.5};
  CHECK_THROWS_AS(solve_qsd_discrete(split), Error);
}

TEST_CASE("minimal QSD reference") {
  SUBCASE("Galton-Watson stabilizes") {
    const auto s = minimal_qsd_reference(build_galton_watson({1.0, 2.0}), {100, 200, 400}, 1e-6);
    CHECK(s.minimal_candidate);
    CHECK(s.truncation == 200);
    CHECK(s.theta == doctest::Approx(1.0).epsilon(1e-8));
    CHECK_FALSE(s.note.empty());
  }
  SUBCASE("finite chain returns the unique QSD") {
    const auto s = minimal_qsd_reference(two_state_model(), {100, 200}, 1e-6);
    CHECK(s.truncation == 2);
    CHECK(std::abs(s.nu.mass(1) - kT2Nu1) < 1e-10);
  }
  SUBCASE("drifted walk") {
    const auto walk = build_birth_death(BirthDeathSpec::constant(1, 2), std::nullopt);
    const auto s = minimal_qsd_reference(walk, {100, 200, 400, 800}, 1e-3);
    CHECK(s.truncation == 400);
    CHECK(std::abs(s.theta + s.lambda) <= 1e-8);
    CHECK(std::abs(s.theta - theta_of(walk, s.nu)) <= 1e-8);
    try {
      minimal_qsd_reference(walk, {100, 200}, 1e-6);
      FAIL("expected NoStabilization");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNoStabilization);
    }
  }
}
