#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sphcov/estimators.hpp"
#include "sphcov/postprocess.hpp"
#include "sphcov/rng.hpp"
#include "support.hpp"

using namespace sphcov;

TEST_CASE("fit_mean trivial and shrinkage behavior") {
  const ZonalKernel k = matern_zonal(2.5, 0.4);
  SUBCASE("zero data gives zero weights") {
    Dataset data;
    data.replicates.push_back({{{0, 0, 1}}, {0.0}});
    const MeanEstimate est = fit_mean(data, k, 1.0);
    CHECK(est.alpha.cwiseAbs().maxCoeff() == 0.0);
    CHECK(eval_mean(est, {1, 0, 0}) == 0.0);
  }
  SUBCASE("huge ridge shrinks the estimate to zero") {
    const Dataset data = test::demo_dataset(4, 6, 0.1, 2);
    const MeanEstimate est = fit_mean(data, k, 1e6);
    double data_scale = 0.0;
    for (const auto& rep : data.replicates) {
      for (double w : rep.values) data_scale = std::max(data_scale, std::abs(w));
    }
    const SphereGrid grid = fibonacci_grid(200);
    double sup = 0.0;
    for (const auto& u : grid.nodes) {
      sup = std::max(sup, std::abs(eval_mean(est, u)));
    }
    CHECK(sup < 1e-3 * data_scale);
  }
  SUBCASE("solution satisfies the normal equations") {
    const Dataset data = test::demo_dataset(2, 2, 0.1, 3);
    const double eta = 0.7;
    const MeanEstimate est = fit_mean(data, k, eta);
    const Eigen::MatrixXd g = build_mean_gram(data, k);
    Eigen::VectorXd y(4);
    Eigen::Index pos = 0;
    for (const auto& rep : data.replicates) {
      for (double w : rep.values) {
        y[pos++] = w / std::sqrt(2.0);
      }
    }
    const double ridge = eta * 2.0 / kFourPi;
    const Eigen::VectorXd resid =
        (g + ridge * Eigen::MatrixXd::Identity(4, 4)) * est.alpha - y;
    CHECK(resid.norm() / y.norm() <= 1e-10);
  }
  SUBCASE("invalid eta") {
    const Dataset data = test::demo_dataset(2, 2, 0.1, 3);
    CHECK_THROWS_AS(fit_mean(data, k, 0.0), std::invalid_argument);
  }
}

TEST_CASE("eval_mean equals an independent double-loop sum") {
  const Dataset data = test::demo_dataset(3, 4, 0.1, 5);
  const ZonalKernel k = matern_zonal(2.5, 0.4);
  const MeanEstimate est = fit_mean(data, k, 0.5);
  const auto pts = sample_uniform_sphere(5, 71);
  for (const auto& u : pts) {
    double expected = 0.0;
    Eigen::Index m = 0;
    for (const auto& rep : data.replicates) {
      const double inv_sqrt_r =
          1.0 / std::sqrt(static_cast<double>(rep.locations.size()));
      for (const auto& loc : rep.locations) {
        expected += inv_sqrt_r * est.alpha[m++] * k(dot(u, loc));
      }
    }
    CHECK(std::abs(eval_mean(est, u) - expected) <= 1e-12);
  }
  SUBCASE("continuity under small perturbations") {
    const MeanEstimate est2 = fit_mean(data, k, 0.5);
    for (const auto& u : pts) {
      const SphericalPoint v =
          make_unit(u.x + 1e-6, u.y, u.z);
      CHECK(std::abs(eval_mean(est2, u) - eval_mean(est2, v)) < 1e-4);
    }
  }
}

TEST_CASE("fit_second_moment trivial cases") {
  const ZonalKernel k = matern_zonal(2.5, 0.4);
  SUBCASE("zero data gives the zero surface") {
    Dataset data = test::demo_dataset(2, 3, 0.0, 7);
    for (auto& rep : data.replicates) {
      for (double& w : rep.values) w = 0.0;
    }
    const SecondMomentEstimate est = fit_second_moment(data, k, 1.0);
    CHECK(est.beta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(eval_second_moment(est, {0, 0, 1}, {1, 0, 0}) == 0.0);
  }
  SUBCASE("r < 2 is rejected") {
    Dataset data;
    data.replicates.push_back({{{0, 0, 1}}, {1.0}});
    CHECK_THROWS_AS(fit_second_moment(data, k, 1.0), std::invalid_argument);
  }
}

TEST_CASE("fast path equals the dense Theorem-4.2 path") {
  const SourceModel model = test::demo_model();
  const Dataset data = simulate_dataset(model, 2, 3, 0.1, 11);
  const double eta = 1.3;
  SolverConfig cfg;
  cfg.threshold_frac = 0.0;
  cfg.tol = 1e-13;
  FitReport fast_rep;
  const SecondMomentEstimate fast =
      fit_second_moment(data, model.kernel, eta, cfg, &fast_rep);
  CHECK(fast_rep.path == "sparse-cg");
  SolverConfig dense_cfg;
  dense_cfg.path = SolverConfig::Path::kDense;
  FitReport dense_rep;
  const SecondMomentEstimate dense =
      fit_second_moment(data, model.kernel, eta, dense_cfg, &dense_rep);
  CHECK(dense_rep.path == "dense-direct");

  const auto pts = sample_uniform_sphere(100, 13);
  for (int i = 0; i < 50; ++i) {
    const auto& u = pts[(std::size_t)(2 * i)];
    const auto& v = pts[(std::size_t)(2 * i + 1)];
    CHECK(std::abs(eval_second_moment(fast, u, v) -
                   eval_second_moment(dense, u, v)) <= 1e-8);
  }
  // weight-level agreement after renormalization
  const double scale = std::sqrt(6.0);  // sqrt(r(r-1))
  CHECK((fast.eval_weights - dense.beta / scale).cwiseAbs().maxCoeff() <=
        1e-8 * dense.beta.cwiseAbs().maxCoeff());
}

TEST_CASE("matrix-free path solves the same system") {
  const SourceModel model = test::demo_model();
  const Dataset data = simulate_dataset(model, 3, 4, 0.1, 19);
  SolverConfig sparse_cfg;
  sparse_cfg.tol = 1e-12;
  SolverConfig free_cfg = sparse_cfg;
  free_cfg.path = SolverConfig::Path::kMatrixFree;
  FitReport rep;
  const SecondMomentEstimate a =
      fit_second_moment(data, model.kernel, 2.0, sparse_cfg);
  const SecondMomentEstimate b =
      fit_second_moment(data, model.kernel, 2.0, free_cfg, &rep);
  CHECK(rep.path == "matrix-free-cg");
  CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() <=
        1e-9 * a.beta.cwiseAbs().maxCoeff());
}

TEST_CASE("eval_second_moment independent oracle and symmetry") {
  const SourceModel model = test::demo_model();
  const Dataset data = simulate_dataset(model, 3, 3, 0.1, 17);
  const SecondMomentEstimate est =
      fit_second_moment(data, model.kernel, 0.9);
  const auto pts = sample_uniform_sphere(40, 23);
  SUBCASE("brute-force pair sum") {
    for (int i = 0; i < 10; ++i) {
      const auto& u = pts[(std::size_t)(2 * i)];
      const auto& v = pts[(std::size_t)(2 * i + 1)];
      double expected = 0.0;
      for (Eigen::Index m = 0; m < est.eval_weights.size(); ++m) {
        expected += est.eval_weights[m] *
                    model.kernel(dot(u, est.x[(std::size_t)m])) *
                    model.kernel(dot(v, est.y[(std::size_t)m]));
      }
      CHECK(std::abs(eval_second_moment(est, u, v) - expected) <= 1e-12);
    }
  }
  SUBCASE("estimator symmetry") {
    for (int i = 0; i < 20; ++i) {
      const auto& u = pts[(std::size_t)(2 * i)];
      const auto& v = pts[(std::size_t)(2 * i + 1)];
      CHECK(std::abs(eval_second_moment(est, u, v) -
                     eval_second_moment(est, v, u)) <= 1e-10);
    }
  }
}

TEST_CASE("estimate is linear in the pair products") {
  const SourceModel model = test::demo_model();
  Dataset data = simulate_dataset(model, 2, 3, 0.1, 29);
  SolverConfig cfg;
  cfg.tol = 1e-13;
  const SecondMomentEstimate base =
      fit_second_moment(data, model.kernel, 1.1, cfg);
  // doubling every w scales all products w_ij w_ik by 4
  for (auto& rep : data.replicates) {
    for (double& w : rep.values) w *= 2.0;
  }
  const SecondMomentEstimate scaled =
      fit_second_moment(data, model.kernel, 1.1, cfg);
  CHECK((scaled.beta - 4.0 * base.beta).cwiseAbs().maxCoeff() <=
        1e-10 * scaled.beta.cwiseAbs().maxCoeff());
}

TEST_CASE("ridge monotonicity of the fitted surface norm") {
  const SourceModel model = test::demo_model();
  const Dataset data = simulate_dataset(model, 4, 5, 0.1, 31);
  const SphereGrid grid = fibonacci_grid(100);
  double prev = std::numeric_limits<double>::infinity();
  for (double eta : {0.2, 0.5, 1.0, 2.0, 5.0, 20.0}) {
    const SecondMomentEstimate est =
        fit_second_moment(data, model.kernel, eta);
    const double norm = l2_norm(eval_on_grid(est, grid));
    CHECK(norm <= prev + 1e-10);
    prev = norm;
  }
}

TEST_CASE("first-order optimality on a small instance") {
  const SourceModel model = test::demo_model();
  const Dataset data = simulate_dataset(model, 3, 3, 0.1, 37);
  const double eta = 0.8;
  SolverConfig cfg;
  cfg.threshold_frac = 0.0;
  cfg.tol = 1e-13;
  const SecondMomentEstimate est =
      fit_second_moment(data, model.kernel, eta, cfg);
  const Eigen::MatrixXd h =
      test::oracle_dense_H_unnormalized(data, model.kernel);
  const Eigen::VectorXd z = test::oracle_z_unnormalized(data);
  const Eigen::VectorXd grad = test::oracle_gradient(h, z, eta, est.beta);
  CHECK(grad.norm() <= 1e-6 * z.norm());

  const double j0 = test::oracle_objective(h, z, eta, est.beta);
  RandomStream rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd delta(est.beta.size());
    for (Eigen::Index i = 0; i < delta.size(); ++i) delta[i] = rng.gauss();
    delta *= 1e-3 * est.beta.norm() / delta.norm();
    CHECK(test::oracle_objective(h, z, eta, est.beta + delta) >=
          j0 - 1e-12 * std::abs(j0));
  }
}

TEST_CASE("covariance evaluation") {
  const SourceModel model = test::demo_model();
  const Dataset data = simulate_dataset(model, 3, 4, 0.1, 43);
  const SecondMomentEstimate r_est =
      fit_second_moment(data, model.kernel, 1.0);
  MeanEstimate zero_mean = fit_mean(data, model.kernel, 1.0);
  zero_mean.alpha.setZero();
  zero_mean.eval_weights.setZero();
  const auto pts = sample_uniform_sphere(10, 47);
  SUBCASE("zero mean reduces covariance to the second moment") {
    for (int i = 0; i < 5; ++i) {
      CHECK(eval_covariance(r_est, zero_mean, pts[(std::size_t)i],
                            pts[(std::size_t)(i + 5)]) ==
            eval_second_moment(r_est, pts[(std::size_t)i],
                               pts[(std::size_t)(i + 5)]));
    }
  }
  SUBCASE("symmetry is inherited") {
    const MeanEstimate mean = fit_mean(data, model.kernel, 0.5);
    for (int i = 0; i < 5; ++i) {
      const auto& u = pts[(std::size_t)i];
      const auto& v = pts[(std::size_t)(i + 5)];
      CHECK(std::abs(eval_covariance(r_est, mean, u, v) -
                     eval_covariance(r_est, mean, v, u)) <= 1e-10);
    }
  }
}

TEST_CASE("lag-h estimation") {
  const SourceModel model = test::demo_model();
  SUBCASE("h = 0 delegates bitwise to fit_second_moment") {
    const Dataset data = simulate_far1(model, 6, 4, 0.1, 0.4, 53);
    const SecondMomentEstimate via_lag =
        fit_lag_autocov(data, model.kernel, 1.0, 0);
    const SecondMomentEstimate direct =
        fit_second_moment(data, model.kernel, 1.0);
    REQUIRE(via_lag.beta.size() == direct.beta.size());
    for (Eigen::Index i = 0; i < direct.beta.size(); ++i) {
      CHECK(via_lag.beta[i] == direct.beta[i]);
    }
  }
  SUBCASE("time ordering and lag range are enforced") {
    const Dataset iid = simulate_dataset(model, 6, 4, 0.1, 53);
    CHECK_THROWS_AS(fit_lag_autocov(iid, model.kernel, 1.0, 1),
                    std::invalid_argument);
    const Dataset data = simulate_far1(model, 6, 4, 0.1, 0.4, 53);
    CHECK_THROWS_AS(fit_lag_autocov(data, model.kernel, 1.0, 5),
                    std::invalid_argument);
  }
  SUBCASE("first-order optimality for the lag functional") {
    const Dataset data = simulate_far1(model, 5, 3, 0.1, 0.5, 59);
    const double eta = 0.6;
    const int h = 1;
    SolverConfig cfg;
    cfg.threshold_frac = 0.0;
    cfg.tol = 1e-13;
    const SecondMomentEstimate est =
        fit_lag_autocov(data, model.kernel, eta, h, cfg);
    // literal lag system: pairs (U_{t+1,j}, U_{t,k}), all j,k
    const int n = data.n(), r = data.r();
    const std::int64_t dim = static_cast<std::int64_t>(n - h) * r * r;
    Eigen::MatrixXd hm(dim, dim);
    Eigen::VectorXd z(dim);
    std::vector<SphericalPoint> xs, ys;
    for (int t = 0; t < n - h; ++t) {
      for (int k0 = 0; k0 < r; ++k0) {
        for (int j0 = 0; j0 < r; ++j0) {
          xs.push_back(data.replicates[(std::size_t)(t + h)].locations[(std::size_t)j0]);
          ys.push_back(data.replicates[(std::size_t)t].locations[(std::size_t)k0]);
          z[static_cast<Eigen::Index>(xs.size()) - 1] =
              data.replicates[(std::size_t)(t + h)].values[(std::size_t)j0] *
              data.replicates[(std::size_t)t].values[(std::size_t)k0];
        }
      }
    }
    for (std::int64_t a = 0; a < dim; ++a) {
      for (std::int64_t b = 0; b < dim; ++b) {
        hm(a, b) = model.kernel(dot(xs[(std::size_t)a], xs[(std::size_t)b])) *
                   model.kernel(dot(ys[(std::size_t)a], ys[(std::size_t)b]));
      }
    }
    // gradient of (4 pi)^2/N ||z - H b||^2 + eta b^T H b at the solution
    const double c = kFourPi * kFourPi / static_cast<double>(dim);
    const Eigen::VectorXd grad =
        -2.0 * c * hm * (z - hm * est.beta) + 2.0 * eta * hm * est.beta;
    CHECK(grad.norm() <= 1e-6 * z.norm());
  }
  SUBCASE("negative lag transposes the positive-lag evaluator") {
    const Dataset data = simulate_far1(model, 6, 3, 0.1, 0.5, 61);
    const SecondMomentEstimate pos =
        fit_lag_autocov(data, model.kernel, 1.0, 1);
    const SecondMomentEstimate neg =
        fit_lag_autocov(data, model.kernel, 1.0, -1);
    const auto pts = sample_uniform_sphere(10, 67);
    for (int i = 0; i < 5; ++i) {
      const auto& u = pts[(std::size_t)i];
      const auto& v = pts[(std::size_t)(i + 5)];
      CHECK(eval_second_moment(neg, u, v) ==
            doctest::Approx(eval_second_moment(pos, v, u)).epsilon(1e-12));
    }
  }
}
