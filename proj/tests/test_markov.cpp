#include <catch_amalgamated.hpp>

#include "muxncs/markov.hpp"

using namespace muxncs;
using Catch::Matchers::WithinAbs;

namespace {

void require_switch(const SwitchDistribution& s, double plus, double zero, double minus) {
  REQUIRE_THAT(s.plus, WithinAbs(plus, 1e-15));
  REQUIRE_THAT(s.zero, WithinAbs(zero, 1e-15));
  REQUIRE_THAT(s.minus, WithinAbs(minus, 1e-15));
}

void require_modes(const ModeDistribution& d, std::array<double, 5> expected) {
  for (std::size_t j = 0; j < 5; ++j) REQUIRE_THAT(d.probs[j], WithinAbs(expected[j], 1e-15));
}

}  // namespace

TEST_CASE("switch distribution examples") {
  require_switch(switch_distribution(1.0, {0.3, 0.6}), 0.5, 0.0, 0.5);
  require_switch(switch_distribution(0.2, {1.0, 0.0}), 0.9, 0.0, 0.1);
  require_switch(switch_distribution(0.0, {0.3, 0.4}), 0.3, 0.3, 0.4);
}

TEST_CASE("switch distribution rejects out-of-range inputs") {
  REQUIRE_THROWS_AS(switch_distribution(-0.1, {0.0, 0.0}), DomainError);
  REQUIRE_THROWS_AS(switch_distribution(1.1, {0.0, 0.0}), DomainError);
  REQUIRE_THROWS_AS(switch_distribution(0.5, {0.7, 0.7}), DomainError);
  REQUIRE_THROWS_AS(switch_distribution(0.5, {-0.1, 0.2}), DomainError);
}

TEST_CASE("corner cases") {
  require_switch(corner_case(Corner::Silent, 0.2), 0.1, 0.8, 0.1);
  require_switch(corner_case(Corner::ObserveOnly, 0.0), 0.0, 0.0, 1.0);
  for (double eps : {0.0, 0.13, 0.5, 1.0}) {
    require_switch(corner_case(Corner::ObserveOnly, eps), eps / 2, 0.0, 1 - eps / 2);
    require_switch(corner_case(Corner::ControlOnly, eps), 1 - eps / 2, 0.0, eps / 2);
    require_switch(corner_case(Corner::Silent, eps), eps / 2, 1 - eps, eps / 2);
  }
  REQUIRE_THROWS_AS(corner_from_index(0), DomainError);
  REQUIRE_THROWS_AS(corner_from_index(4), DomainError);
  REQUIRE(corner_from_index(2) == Corner::ControlOnly);
}

TEST_CASE("mode distribution matches the tabulated operating point") {
  require_modes(corner_mode_distribution(Corner::ObserveOnly, 0.8, 0.2), {0.08, 0.02, 0.72, 0.18, 0.0});
  require_modes(corner_mode_distribution(Corner::ControlOnly, 0.8, 0.2), {0.72, 0.18, 0.08, 0.02, 0.0});
  require_modes(corner_mode_distribution(Corner::Silent, 0.8, 0.2), {0.08, 0.02, 0.08, 0.02, 0.8});
  require_modes(mode_distribution(0.5, {0.5, 0.0, 0.5}), {0.25, 0.25, 0.25, 0.25, 0.0});

  const auto lossless = mode_distribution(1.0, switch_distribution(0.3, {0.2, 0.5}));
  REQUIRE(lossless[Mode::ControlLost] == 0.0);
  REQUIRE(lossless[Mode::ObservationLost] == 0.0);
  REQUIRE_THROWS_AS(mode_distribution(0.0, {0.5, 0.0, 0.5}), DomainError);
}

TEST_CASE("transition matrix rows equal the distribution") {
  const auto unit = transition_matrix(ModeDistribution::make({1.0, 0.0, 0.0, 0.0, 0.0}));
  for (int i = 0; i < 5; ++i) {
    REQUIRE(unit.rows(i, 0) == 1.0);
    for (int j = 1; j < 5; ++j) REQUIRE(unit.rows(i, j) == 0.0);
  }
  const auto c2 = transition_matrix(corner_mode_distribution(Corner::ControlOnly, 0.8, 0.2));
  const std::array<double, 5> row = {0.72, 0.18, 0.08, 0.02, 0.0};
  for (int i = 0; i < 5; ++i) {
    REQUIRE_THAT(c2.rows.row(i).sum(), WithinAbs(1.0, 1e-15));
    for (int j = 0; j < 5; ++j) REQUIRE_THAT(c2.rows(i, j), WithinAbs(row[static_cast<std::size_t>(j)], 1e-15));
  }
}

TEST_CASE("convex combination identity") {
  REQUIRE(convex_combination_check(0.37, {0.0, 1.0}) == 0.0);
  REQUIRE(convex_combination_check(0.3, {0.25, 0.5}) < 1e-12);
  for (int i = 0; i < 10; ++i) {
    for (int a = 0; a < 10; ++a) {
      for (int b = 0; a + b < 10; ++b) {
        REQUIRE(convex_combination_check(i / 9.0, {a / 9.0, b / 9.0}) < 1e-12);
      }
    }
  }
}

TEST_CASE("mode distribution make validates its input") {
  REQUIRE_THROWS_AS(ModeDistribution::make({0.5, 0.5, 0.5, 0.0, 0.0}), DomainError);
  REQUIRE_THROWS_AS(ModeDistribution::make({1.5, -0.5, 0.0, 0.0, 0.0}), DomainError);
}
