#include <doctest.h>

#include <random>

#include "evmpc/box_qp.hpp"

using namespace evmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// random symmetric positive definite matrix with eigenvalues in [1, 1 + spread]
MatrixXd random_spd(int n, std::mt19937_64& rng, double spread) {
  std::normal_distribution<double> g;
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  const MatrixXd q = qr.householderQ();
  VectorXd d(n);
  std::uniform_real_distribution<double> u(1.0, 1.0 + spread);
  for (int i = 0; i < n; ++i) d(i) = u(rng);
  return q * d.asDiagonal() * q.transpose();
}

}  // namespace

TEST_CASE("unconstrained minimum inside the box") {
  MatrixXd h(2, 2);
  h << 2, 0, 0, 4;
  VectorXd c(2);
  c << 2, 4;  // minimizer (1, 1)
  const VectorXd lo = VectorXd::Constant(2, -10), hi = VectorXd::Constant(2, 10);
  const BoxQpResult r = solve_box_qp(h, c, lo, hi, VectorXd::Zero(2), 1e-12);
  CHECK(r.converged);
  CHECK(r.x(0) == doctest::Approx(1.0));
  CHECK(r.x(1) == doctest::Approx(1.0));
}

TEST_CASE("active bound") {
  MatrixXd h = MatrixXd::Identity(2, 2);
  VectorXd c(2);
  c << 5, -1;  // minimizer (5, -1), box [0, 2]^2 gives (2, 0)
  const BoxQpResult r = solve_box_qp(h, c, VectorXd::Zero(2), VectorXd::Constant(2, 2.0), VectorXd::Zero(2), 1e-12);
  CHECK(r.x(0) == doctest::Approx(2.0));
  CHECK(r.x(1) == doctest::Approx(0.0));
}

TEST_CASE("newton and gradient routes agree on random problems") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 7;
    const MatrixXd h = random_spd(n, rng, 20.0);
    VectorXd c(n), lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      c(i) = 10.0 * u(rng);
      lo(i) = -std::abs(u(rng));
      hi(i) = std::abs(u(rng));
    }
    const BoxQpResult a = solve_box_qp(h, c, lo, hi, VectorXd::Zero(n), 1e-10);
    const BoxQpResult b = solve_box_qp_gradient(h, c, lo, hi, VectorXd::Zero(n), 21.0, 1e-10, 1000000);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() <= 1e-7);
    CHECK(box_qp_residual(h, c, lo, hi, a.x) <= 1e-10);
  }
}
