#include <doctest.h>

#include <Eigen/Dense>

#include "sphcov/rng.hpp"
#include "sphcov/solver.hpp"

using namespace sphcov;

namespace {

Eigen::MatrixXd random_spd(int n, std::uint64_t seed) {
  RandomStream rng(seed);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = rng.gauss();
  }
  return a * a.transpose() + Eigen::MatrixXd::Identity(n, n);
}

auto dense_apply(const Eigen::MatrixXd& a) {
  return [&a](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = a * x; };
}

}  // namespace

TEST_CASE("identity system converges in one iteration") {
  Eigen::VectorXd b(5);
  b << 1, -2, 3, 0.5, 4;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(5, 5);
  const CgResult res =
      conjugate_gradient(dense_apply(eye), b, Eigen::VectorXd(), 1e-12, 10);
  CHECK(res.iterations == 1);
  CHECK((res.x - b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero rhs returns zero without iterating") {
  const Eigen::MatrixXd a = random_spd(8, 1);
  const CgResult res = conjugate_gradient(
      dense_apply(a), Eigen::VectorXd::Zero(8), Eigen::VectorXd(), 1e-10, 10);
  CHECK(res.iterations == 0);
  CHECK(res.x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("random SPD system matches a dense direct solve") {
  const Eigen::MatrixXd a = random_spd(50, 7);
  RandomStream rng(9);
  Eigen::VectorXd b(50);
  for (int i = 0; i < 50; ++i) b[i] = rng.gauss();
  const Eigen::VectorXd inv_diag = a.diagonal().cwiseInverse();
  const CgResult res =
      conjugate_gradient(dense_apply(a), b, inv_diag, 1e-12, 1000);
  const Eigen::VectorXd direct = a.llt().solve(b);
  CHECK((res.x - direct).norm() / direct.norm() < 1e-8);
  CHECK(res.rel_residual <= 1e-12);
}

TEST_CASE("iteration budget exhaustion reports the residual") {
  const Eigen::MatrixXd a = random_spd(40, 3);
  Eigen::VectorXd b = Eigen::VectorXd::Ones(40);
  CHECK_THROWS_WITH_AS(
      conjugate_gradient(dense_apply(a), b, Eigen::VectorXd(), 1e-15, 1),
      doctest::Contains("max_iter"), numerical_error);
}

TEST_CASE("indefinite operators break down loudly") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(4, 4);
  a(2, 2) = -1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Ones(4);
  CHECK_THROWS_AS(
      conjugate_gradient(dense_apply(a), b, Eigen::VectorXd(), 1e-10, 100),
      numerical_error);
}

TEST_CASE("jacobi preconditioning preserves the solution") {
  const Eigen::MatrixXd a = random_spd(30, 11);
  RandomStream rng(12);
  Eigen::VectorXd b(30);
  for (int i = 0; i < 30; ++i) b[i] = rng.gauss();
  const CgResult plain =
      conjugate_gradient(dense_apply(a), b, Eigen::VectorXd(), 1e-12, 500);
  const CgResult pre = conjugate_gradient(
      dense_apply(a), b, a.diagonal().cwiseInverse().eval(), 1e-12, 500);
  CHECK((plain.x - pre.x).norm() / plain.x.norm() < 1e-9);
}

TEST_CASE("solver config default iteration budget") {
  SolverConfig cfg;
  CHECK(cfg.effective_max_iter(4) == 200);
  CHECK(cfg.effective_max_iter(1000000) == 10000);
  cfg.max_iter = 7;
  CHECK(cfg.effective_max_iter(1000000) == 7);
}
