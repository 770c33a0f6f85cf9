#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "evmpc/oracle.hpp"
#include "support/oracles.hpp"

using namespace evmpc;

namespace {

Market reference_market(int slots, std::vector<EVSession> evs) {
  Market m;
  m.window = TimeGrid(0, slots, 0.25);
  m.evs = std::move(evs);
  m.dso = {0.06, 0.9, 0.0, 100.0};
  m.storage = {-100.0, 100.0, 100.0, 100.0, 1.0, 1.0};
  m.x_now = 100.0;
  return m;
}

}  // namespace

TEST_CASE("projection onto a box slice") {
  std::vector<double> y{5.0, -1.0, 2.0};
  project_box_sum(y, 0.0, 3.0, 4.0);
  CHECK(std::accumulate(y.begin(), y.end(), 0.0) == doctest::Approx(4.0));
  // clamp(y - 1) lands on the slice
  CHECK(y[0] == doctest::Approx(3.0));
  CHECK(y[1] == doctest::Approx(0.0));
  CHECK(y[2] == doctest::Approx(1.0));
}

TEST_CASE("empty free market has zero welfare") {
  Market m = reference_market(2, {});
  m.dso.b = 0.0;
  const CentralSolution s = solve_central(m, {});
  CHECK(s.converged);
  CHECK(s.welfare == doctest::Approx(0.0).epsilon(1e-9));
  for (double v : s.p_s) CHECK(v == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("forced vehicle: welfare against a one-dimensional storage search") {
  const Market m = reference_market(1, {{.id = "f", .arrival = 0, .departure = 1, .energy = 5.5}});
  const CentralSolution s = solve_central(m, {});
  REQUIRE(s.converged);
  CHECK(s.ev_profiles[0][0] == doctest::Approx(22.0));

  double best = -1e300;
  for (double ps = -100.0; ps <= 100.0; ps += 0.001) {
    const double v = oracle::log_utility(22.0, 10.0) - oracle::quad_cost(22.0 - ps, 0.06, 0.9) -
                     oracle::tracking(100.0, {ps}, 100.0, 0.25);
    best = std::max(best, v);
  }
  CHECK(s.welfare == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("two vehicles, two slots: agrees with the negotiated plan") {
  Scenario sc;
  sc.dso = {0.06, 0.9, 0.0, 100.0};
  sc.storage = StorageSpec{-100.0, 100.0, 100.0, 100.0, 1.0, 1.0};
  const Market m = reference_market(2, {{.id = "a", .arrival = 0, .departure = 2, .energy = 4.0},
                                     {.id = "b", .arrival = 0, .departure = 2, .weight = 12.0, .energy = 6.0}});
  const VerifyReport r = verify_market(m, sc);
  CHECK(r.negotiation_converged);
  CHECK(r.oracle_converged);
  CHECK(r.relative_gap <= 0.01);
  CHECK(r.max_residual <= 0.1);
}

TEST_CASE("oversized instances are refused") {
  const Market m = reference_market(7, {});
  CHECK_THROWS_AS(solve_central(m, {}), std::invalid_argument);
}

TEST_CASE("unreachable energy is flagged") {
  const Market m = reference_market(1, {{.id = "greedy", .arrival = 0, .departure = 1, .energy = 10.0}});
  const CentralSolution s = solve_central(m, {});
  REQUIRE(s.infeasible.size() == 1);
  CHECK(s.infeasible[0] == "greedy");
  CHECK(s.ev_profiles[0][0] == doctest::Approx(22.0));
}

TEST_CASE("truncation keeps the instance inside the cap") {
  Scenario sc;
  sc.generate.count = 10;
  sc.seed = 3;
  const Market m = truncate_for_oracle(sc, {});
  CHECK(m.window.n() <= 6);
  CHECK(m.evs.size() <= 4);
  for (const EVSession& ev : m.evs) {
    CHECK(ev.departure <= m.window.n());
    CHECK(ev.energy <= ev.energy_per_kw(0.25) * ev.p_max * (ev.departure - ev.arrival) + 1e-9);
  }
}
