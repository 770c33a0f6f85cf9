#include <doctest.h>

#include <algorithm>
#include <random>

#include "evmpc/coordinator.hpp"
#include "evmpc/mpc_loop.hpp"
#include "evmpc/scenario_io.hpp"

using namespace evmpc;

TEST_CASE("price updates stay nonnegative") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lam(0.0, 10.0), res(-200.0, 200.0), step(0.0, 0.1);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> l(6), r(6);
    for (int j = 0; j < 6; ++j) {
      l[j] = lam(rng);
      r[j] = res(rng);
    }
    const PriceVector next = update_price(PriceVector(l), r, step(rng));
    for (double v : next.values()) CHECK(v >= 0.0);
  }
}

TEST_CASE("dual function is convex along random segments") {
  Market m;
  m.window = TimeGrid(0, 3, 0.25);
  m.evs = {{.id = "a", .arrival = 0, .departure = 3, .energy = 8.0}, {.id = "b", .arrival = 0, .departure = 2, .energy = 3.0}};
  m.storage = {-100.0, 100.0, 100.0, 100.0, 1.0, 1.0};
  m.x_now = 100.0;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 12.0);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
    std::vector<double> mid(3);
    for (int j = 0; j < 3; ++j) mid[j] = 0.5 * (a[j] + b[j]);
    const double da = evaluate_dual(PriceVector(a), m, {}).dual_value;
    const double db = evaluate_dual(PriceVector(b), m, {}).dual_value;
    const double dm = evaluate_dual(PriceVector(mid), m, {}).dual_value;
    CHECK(dm <= 0.5 * (da + db) + 1e-7);
  }
}

TEST_CASE("raising one slot's price never raises its demand") {
  Market m;
  m.window = TimeGrid(0, 4, 0.25);
  for (int i = 0; i < 4; ++i) m.evs.push_back({.id = std::to_string(i), .arrival = 0, .departure = 4, .energy = 2.0 + 3.0 * i});
  double prev = 1e300;
  for (double lam = 0.0; lam < 20.0; lam += 0.25) {
    const DualIterationState s = evaluate_dual(PriceVector({lam, 4.0, 4.0, 4.0}), m, {});
    CHECK(s.demand[0] <= prev + 1e-9);
    prev = s.demand[0];
  }
}

TEST_CASE("random fleets: per-slot balance and SOC bookkeeping") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Scenario s;
    s.grid.num_slots = 12;
    s.storage = StorageSpec{-50.0, 50.0, 60.0, 60.0, 1.0, 1.0};
    s.generate.count = 5;
    s.generate.energy_max = 15.0;
    s.seed = seed;
    const SimulationTrace t = run(s);
    for (const SlotRecord& r : t.slots) {
      double sum = 0.0;
      for (const EvSlotState& e : r.per_ev) {
        sum += e.power;
        CHECK(e.power >= -1e-12);
        CHECK(e.power <= 22.0 + 1e-9);
        CHECK(e.soc_error >= -1e-9);
      }
      CHECK(sum == doctest::Approx(r.demand_total).epsilon(1e-12));
    }
  }
}
