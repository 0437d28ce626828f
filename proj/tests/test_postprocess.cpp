#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sphcov/postprocess.hpp"
#include "sphcov/rng.hpp"
#include "support.hpp"

using namespace sphcov;

namespace {

GridField constant_field(const SphereGrid& grid, double value) {
  GridField f;
  f.grid = grid;
  f.bivariate = true;
  f.values = Eigen::MatrixXd::Constant(
      static_cast<Eigen::Index>(grid.size()),
      static_cast<Eigen::Index>(grid.size()), value);
  return f;
}

GridField random_psd_field(const SphereGrid& grid, std::uint64_t seed) {
  RandomStream rng(seed);
  const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.gauss();
  }
  GridField f;
  f.grid = grid;
  f.bivariate = true;
  f.values = a * a.transpose() / static_cast<double>(n);
  return f;
}

}  // namespace

TEST_CASE("grid evaluation of estimates") {
  const SourceModel model = test::demo_model();
  const Dataset data = simulate_dataset(model, 3, 4, 0.1, 3);
  const SphereGrid grid = fibonacci_grid(60);
  SUBCASE("zero estimate gives the zero field") {
    SecondMomentEstimate est = fit_second_moment(data, model.kernel, 1.0);
    est.eval_weights.setZero();
    const GridField f = eval_on_grid(est, grid);
    CHECK(f.values.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("values match pointwise evaluation and are symmetric") {
    const SecondMomentEstimate est =
        fit_second_moment(data, model.kernel, 1.0);
    const GridField f = eval_on_grid(est, grid);
    for (std::size_t a = 0; a < 6; ++a) {
      for (std::size_t b = 0; b < 6; ++b) {
        CHECK(f.values(static_cast<Eigen::Index>(a),
                       static_cast<Eigen::Index>(b)) ==
              doctest::Approx(eval_second_moment(est, grid.nodes[a],
                                                 grid.nodes[b]))
                  .epsilon(1e-10));
      }
    }
    CHECK((f.values - f.values.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("mean estimates evaluate to a univariate field") {
    const MeanEstimate est = fit_mean(data, model.kernel, 0.7);
    const GridField f = eval_on_grid(est, grid);
    CHECK_FALSE(f.bivariate);
    for (std::size_t a = 0; a < 10; ++a) {
      CHECK(f.values(static_cast<Eigen::Index>(a), 0) ==
            doctest::Approx(eval_mean(est, grid.nodes[a])).epsilon(1e-12));
    }
  }
  SUBCASE("truth field matches true_second_moment") {
    const GridField f = eval_truth_on_grid(model, grid);
    for (std::size_t a = 0; a < 5; ++a) {
      for (std::size_t b = 0; b < 5; ++b) {
        CHECK(f.values(static_cast<Eigen::Index>(a),
                       static_cast<Eigen::Index>(b)) ==
              doctest::Approx(true_second_moment(model, grid.nodes[a],
                                                 grid.nodes[b]))
                  .epsilon(1e-12));
      }
    }
  }
  SUBCASE("lagged and transposed estimates use the block fast path") {
    const Dataset far = simulate_far1(model, 6, 3, 0.1, 0.5, 5);
    const SecondMomentEstimate pos =
        fit_lag_autocov(far, model.kernel, 1.0, 1);
    const SecondMomentEstimate neg =
        fit_lag_autocov(far, model.kernel, 1.0, -1);
    const GridField fp = eval_on_grid(pos, grid);
    const GridField fn = eval_on_grid(neg, grid);
    for (std::size_t a = 0; a < 5; ++a) {
      for (std::size_t b = 0; b < 5; ++b) {
        const auto ia = static_cast<Eigen::Index>(a);
        const auto ib = static_cast<Eigen::Index>(b);
        CHECK(fp.values(ia, ib) ==
              doctest::Approx(eval_second_moment(pos, grid.nodes[a],
                                                 grid.nodes[b]))
                  .epsilon(1e-10));
        CHECK(fn.values(ia, ib) == doctest::Approx(fp.values(ib, ia)));
      }
    }
  }
}

TEST_CASE("psd projection") {
  const SphereGrid grid = fibonacci_grid(40);
  SUBCASE("fixes PSD fields") {
    const GridField f = random_psd_field(grid, 7);
    const PsdProjection p = project_psd(f);
    CHECK((p.field.values - f.values).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(p.clipped_mass <= 1e-12);
  }
  SUBCASE("annihilates negative-definite fields") {
    GridField f = constant_field(grid, 0.0);
    f.values = -Eigen::MatrixXd::Identity(40, 40);
    const PsdProjection p = project_psd(f);
    CHECK(p.field.values.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(p.clipped_count == 40);
  }
  SUBCASE("idempotence and nonnegative spectrum") {
    GridField f = random_psd_field(grid, 9);
    // plant a negative direction
    f.values -= 0.8 * f.values;
    f.values.diagonal().array() -= 0.05;
    const PsdProjection once = project_psd(f);
    const PsdProjection twice = project_psd(once.field);
    CHECK((twice.field.values - once.field.values).cwiseAbs().maxCoeff() <=
          1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(once.field.values);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
  SUBCASE("projection is the nearest-point map") {
    GridField f = random_psd_field(grid, 11);
    f.values.diagonal().array() -= 0.2;  // push outside the cone
    const PsdProjection p = project_psd(f);
    const double self = l2_error(f, p.field);
    for (int trial = 0; trial < 20; ++trial) {
      const GridField other =
          random_psd_field(grid, 100 + static_cast<std::uint64_t>(trial));
      CHECK(self <= l2_error(f, other) + 1e-9);
    }
  }
  SUBCASE("univariate fields are rejected") {
    GridField f;
    f.grid = grid;
    f.bivariate = false;
    f.values = Eigen::MatrixXd::Zero(40, 1);
    CHECK_THROWS_AS(project_psd(f), std::invalid_argument);
  }
}

TEST_CASE("l2 error") {
  const SphereGrid grid = fibonacci_grid(50);
  SUBCASE("identical fields have zero distance") {
    const GridField f = random_psd_field(grid, 13);
    CHECK(l2_error(f, f) == 0.0);
  }
  SUBCASE("constant bivariate fields scale with 4 pi") {
    const GridField a = constant_field(grid, 1.25);
    const GridField b = constant_field(grid, -0.75);
    CHECK(l2_error(a, b) == doctest::Approx(2.0 * kFourPi).epsilon(1e-12));
    const GridField a2 = constant_field(fibonacci_grid(200), 1.25);
    const GridField b2 = constant_field(fibonacci_grid(200), -0.75);
    CHECK(l2_error(a2, b2) == doctest::Approx(2.0 * kFourPi).epsilon(1e-12));
  }
  SUBCASE("triangle inequality") {
    for (int trial = 0; trial < 10; ++trial) {
      const auto s = static_cast<std::uint64_t>(3 * trial);
      const GridField a = random_psd_field(grid, s);
      const GridField b = random_psd_field(grid, s + 1);
      const GridField c = random_psd_field(grid, s + 2);
      CHECK(l2_error(a, c) <= l2_error(a, b) + l2_error(b, c) + 1e-9);
    }
  }
  SUBCASE("grid mismatch is rejected") {
    const GridField a = constant_field(grid, 1.0);
    const GridField b = constant_field(fibonacci_grid(51), 1.0);
    CHECK_THROWS_AS(l2_error(a, b), std::invalid_argument);
  }
}
