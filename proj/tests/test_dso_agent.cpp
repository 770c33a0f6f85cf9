#include <doctest.h>

#include <random>
#include <vector>

#include "evmpc/dso_agent.hpp"
#include "support/oracles.hpp"

using namespace evmpc;

namespace {

const DSOSpec kDso{0.06, 0.9, 0.0, 100.0};
const StorageSpec kStorage{-100.0, 100.0, 100.0, 100.0, 1.0, 1.0};

DSOSubproblem make(std::vector<double> prices, DSOSpec dso = kDso, StorageSpec st = kStorage) {
  const int n = static_cast<int>(prices.size());
  return {dso, st, st.x0, TimeGrid(0, n, 0.25), PriceVector(std::move(prices))};
}

}  // namespace

TEST_CASE("generation cost") {
  CHECK(generation_cost(10.0, kDso) == doctest::Approx(15.0));
  CHECK(generation_cost(0.0, kDso) == doctest::Approx(0.0));
  CHECK(generation_cost(-7.5, kDso) == doctest::Approx(-3.375));
}

TEST_CASE("storage tracking penalty") {
  CHECK(storage_tracking_penalty(100.0, std::vector<double>{0, 0, 0}, kStorage, 0.25) == doctest::Approx(0.0));
  CHECK(storage_tracking_penalty(100.0, std::vector<double>{4.0}, kStorage, 0.25) == doctest::Approx(1.0));
  CHECK(storage_tracking_penalty(100.0, std::vector<double>{4.0, -4.0}, kStorage, 0.25) == doctest::Approx(1.0));
}

TEST_CASE("free energy and a balanced store keep everything at zero") {
  DSOSpec d = kDso;
  d.b = 0.0;
  const DSOSolution s = solve_dso(make({0.0, 0.0, 0.0}, d), {});
  for (double v : s.p_l) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
  for (double v : s.p_s) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(s.objective == doctest::Approx(0.0));
}

TEST_CASE("zero price discharges the store against the linear cost") {
  // P_l stays at its lower bound; P_s = b / (2a + 2 rho (delta_s T_c)^2)
  const DSOSolution s = solve_dso(make({0.0}), {});
  CHECK(s.p_l[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(s.p_s[0] == doctest::Approx(0.9 / 0.245).epsilon(1e-9));
  CHECK(s.p_s[0] == doctest::Approx(3.673469).epsilon(1e-6));

  const oracle::Point2 ref = oracle::dso_one_slot(0.0, 0.06, 0.9, 1.0, 0.25, 0.0, 100.0, -100.0, 100.0, 0.5);
  CHECK(s.p_l[0] == doctest::Approx(ref.x).epsilon(1e-4));
  CHECK(s.p_s[0] == doctest::Approx(ref.y).epsilon(1e-4));
}

TEST_CASE("reference price, one slot, matches a grid search") {
  const double lam = to_internal_price(16.0, 0.25);
  const DSOSolution s = solve_dso(make({lam}), {});
  const oracle::Point2 ref = oracle::dso_one_slot(lam, 0.06, 0.9, 1.0, 0.25, 0.0, 100.0, -100.0, 100.0, 0.5);
  CHECK(s.p_l[0] == doctest::Approx(ref.x).epsilon(1e-4));
  CHECK(s.p_s[0] == doctest::Approx(ref.y).epsilon(1e-4));
  // frozen: interior point P_s = lambda / (2 rho k^2), P_l = P_s + (lambda - b)/(2a)
  CHECK(s.p_s[0] == doctest::Approx(32.0));
  CHECK(s.p_l[0] == doctest::Approx(57.833333).epsilon(1e-6));
}

TEST_CASE("high price pins generation at its cap") {
  const DSOSolution s = solve_dso(make({50.0}), {});
  CHECK(s.p_l[0] == doctest::Approx(100.0));
}

TEST_CASE("newton and reference gradient routes agree") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> price(0.0, 12.0);
  for (int n = 1; n <= 8; ++n) {
    std::vector<double> lam(static_cast<std::size_t>(n));
    for (double& l : lam) l = price(rng);
    DSOSubproblem sub = make(lam);
    sub.x_now = 80.0;
    Tolerances eps;
    eps.kkt = 1e-7;
    const DSOSolution a = solve_dso(sub, eps, DsoMethod::projected_newton);
    const DSOSolution b = solve_dso(sub, eps, DsoMethod::projected_gradient);
    for (int i = 0; i < n; ++i) {
      CHECK(a.p_l[i] == doctest::Approx(b.p_l[i]).epsilon(1e-5));
      CHECK(a.p_s[i] == doctest::Approx(b.p_s[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("solution beats random feasible points") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> price(0.0, 12.0), pl(0.0, 100.0), ps(-100.0, 100.0);
  const DSOSubproblem sub = make({price(rng), price(rng), price(rng), price(rng)});
  const DSOSolution s = solve_dso(sub, {});
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> l(4), st(4);
    for (int j = 0; j < 4; ++j) {
      l[j] = pl(rng);
      st[j] = ps(rng);
    }
    CHECK(dso_objective(sub, l, st) <= s.objective + 1e-9);
  }
}

TEST_CASE("supply does not decrease with price") {
  double prev = -1.0;
  for (double lam = 0.0; lam <= 30.0; lam += 0.5) {
    const DSOSolution s = solve_dso(make({lam}), {});
    CHECK(s.p_l[0] >= prev - 1e-9);
    prev = s.p_l[0];
  }
}

TEST_CASE("iteration cap surfaces as a solver error") {
  Tolerances eps;
  eps.max_dso_iterations = 1;
  eps.kkt = 1e-14;
  std::vector<double> lam(12, 3.0);
  CHECK_THROWS_AS(solve_dso(make(lam), eps, DsoMethod::projected_gradient), SolverError);
}
