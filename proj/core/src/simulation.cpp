#include "sphcov/simulation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sphcov/rng.hpp"

namespace sphcov {

namespace {

// Cholesky with eigendecomposition fallback; tiny negative eigenvalues
// admitted by model validation are clipped to zero.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd lam = eig.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) lam[i] = std::max(lam[i], 0.0);
  return eig.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

SphericalPoint draw_uniform_point(RandomStream& rng) {
  double x, y, z, norm;
  do {
    x = rng.gauss();
    y = rng.gauss();
    z = rng.gauss();
    norm = std::sqrt(x * x + y * y + z * z);
  } while (norm < 1e-12);
  return {x / norm, y / norm, z / norm};
}

}  // namespace

SourceModel make_source_model(std::vector<SphericalPoint> sources,
                              Eigen::MatrixXd weight_cov, ZonalKernel kernel) {
  const int q = static_cast<int>(sources.size());
  if (q < 1) throw std::invalid_argument("source model: needs Q >= 1 sources");
  for (int a = 0; a < q; ++a) {
    for (int b = a + 1; b < q; ++b) {
      if (sources[a] == sources[b]) {
        throw std::invalid_argument("source model: sources must be distinct");
      }
    }
  }
  if (weight_cov.rows() != q || weight_cov.cols() != q) {
    throw std::invalid_argument("source model: weight_cov must be Q x Q");
  }
  const double asym = (weight_cov - weight_cov.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12) {
    throw std::invalid_argument("source model: weight_cov asymmetry " +
                                std::to_string(asym));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(weight_cov);
  const double min_eig = eig.eigenvalues().minCoeff();
  const double trace = weight_cov.trace();
  if (min_eig < -1e-10 * trace) {
    throw std::invalid_argument("source model: weight_cov is not PSD (min "
                                "eigenvalue " +
                                std::to_string(min_eig) + ")");
  }
  SourceModel model{std::move(sources), std::move(weight_cov),
                    std::move(kernel)};
  return model;
}

Eigen::MatrixXd default_weight_cov() {
  Eigen::MatrixXd r(5, 5);
  r << 0.812, -0.013, -0.209, -0.416, -0.028,  //
      -0.013, 0.974, -0.008, -0.632, -0.372,   //
      -0.209, -0.008, 0.909, -0.095, -0.588,   //
      -0.416, -0.632, -0.095, 1.000, 0.235,    //
      -0.028, -0.372, -0.588, 0.235, 0.929;
  return r;
}

Eigen::MatrixXd random_weight_cov(int q, std::uint64_t seed) {
  if (q < 1) throw std::invalid_argument("random_weight_cov: q < 1");
  RandomStream rng(seed, 0x5eed);
  // Wishart-style A A^T / q rescaled to a unit-scale diagonal.
  Eigen::MatrixXd a(q, 2 * q + 2);
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) a(i, j) = rng.gauss();
  }
  Eigen::MatrixXd cov = a * a.transpose() / static_cast<double>(a.cols());
  Eigen::VectorXd d = cov.diagonal().cwiseSqrt().cwiseInverse();
  cov = d.asDiagonal() * cov * d.asDiagonal();
  cov = (cov + cov.transpose()) / 2.0;
  return cov;
}

std::size_t Dataset::total_samples() const {
  std::size_t total = 0;
  for (const auto& rep : replicates) total += rep.locations.size();
  return total;
}

bool Dataset::constant_r() const {
  if (replicates.empty()) return false;
  const std::size_t r0 = replicates.front().locations.size();
  for (const auto& rep : replicates) {
    if (rep.locations.size() != r0) return false;
  }
  return true;
}

int Dataset::r() const {
  return constant_r() ? static_cast<int>(replicates.front().locations.size())
                      : -1;
}

void validate_dataset(const Dataset& data, bool for_covariance) {
  if (data.replicates.empty()) {
    throw std::invalid_argument("dataset: no replicates");
  }
  const std::size_t min_r = for_covariance ? 2 : 1;
  for (std::size_t i = 0; i < data.replicates.size(); ++i) {
    const auto& rep = data.replicates[i];
    if (rep.locations.size() != rep.values.size()) {
      throw std::invalid_argument("dataset: location/value size mismatch");
    }
    if (rep.locations.size() < min_r) {
      throw std::invalid_argument(
          "dataset: replicate " + std::to_string(i + 1) + " has " +
          std::to_string(rep.locations.size()) + " samples, need >= " +
          std::to_string(min_r));
    }
    for (std::size_t a = 0; a < rep.locations.size(); ++a) {
      for (std::size_t b = a + 1; b < rep.locations.size(); ++b) {
        if (rep.locations[a] == rep.locations[b]) {
          throw std::invalid_argument(
              "dataset: duplicate locations within replicate " +
              std::to_string(i + 1));
        }
      }
    }
  }
}

double eval_field(const Eigen::VectorXd& weights, const SourceModel& model,
                  const SphericalPoint& u) {
  if (weights.size() != model.q()) {
    throw std::invalid_argument("eval_field: weight/source count mismatch");
  }
  double acc = 0.0;
  for (int q = 0; q < model.q(); ++q) {
    acc += weights[q] * model.kernel(dot(u, model.sources[static_cast<std::size_t>(q)]));
  }
  return acc;
}

double true_second_moment(const SourceModel& model, const SphericalPoint& u,
                          const SphericalPoint& v) {
  const int q = model.q();
  Eigen::VectorXd ku(q), kv(q);
  for (int i = 0; i < q; ++i) {
    ku[i] = model.kernel(dot(u, model.sources[static_cast<std::size_t>(i)]));
    kv[i] = model.kernel(dot(v, model.sources[static_cast<std::size_t>(i)]));
  }
  return ku.dot(model.weight_cov * kv);
}

namespace {

// Shared replicate layout: locations, then Q field-weight Gaussians, then
// per-sample noise, all from substream (seed, i). The draw order is part of
// the reproducibility contract.
struct ReplicateDraws {
  std::vector<SphericalPoint> locations;
  Eigen::VectorXd raw_gauss;  // Q i.i.d. N(0,1)
  std::vector<double> noise;
};

ReplicateDraws draw_replicate(const SourceModel& model, int r, double noise_sd,
                              std::uint64_t seed, int index) {
  RandomStream rng(seed, static_cast<std::uint64_t>(index));
  ReplicateDraws out;
  out.locations.reserve(static_cast<std::size_t>(r));
  for (int j = 0; j < r; ++j) out.locations.push_back(draw_uniform_point(rng));
  out.raw_gauss.resize(model.q());
  for (int q = 0; q < model.q(); ++q) out.raw_gauss[q] = rng.gauss();
  out.noise.resize(static_cast<std::size_t>(r));
  for (int j = 0; j < r; ++j) out.noise[static_cast<std::size_t>(j)] = noise_sd * rng.gauss();
  return out;
}

Replicate assemble_replicate(const SourceModel& model,
                             const ReplicateDraws& draws,
                             const Eigen::VectorXd& xi) {
  Replicate rep;
  rep.locations = draws.locations;
  rep.values.resize(rep.locations.size());
  for (std::size_t j = 0; j < rep.locations.size(); ++j) {
    rep.values[j] = eval_field(xi, model, rep.locations[j]) + draws.noise[j];
  }
  return rep;
}

}  // namespace

Dataset simulate_dataset(const SourceModel& model, int n, int r,
                         double noise_sd, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate_dataset: n < 1");
  if (r < 1) throw std::invalid_argument("simulate_dataset: r < 1");
  if (noise_sd < 0.0) {
    throw std::invalid_argument("simulate_dataset: negative noise_sd");
  }
  const Eigen::MatrixXd factor = psd_factor(model.weight_cov);
  Dataset data;
  data.noise_sd = noise_sd;
  data.time_ordered = false;
  data.replicates.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const ReplicateDraws draws = draw_replicate(model, r, noise_sd, seed, i);
    const Eigen::VectorXd xi = factor * draws.raw_gauss;
    data.replicates.push_back(assemble_replicate(model, draws, xi));
  }
  return data;
}

Dataset simulate_far1(const SourceModel& model, int n, int r, double noise_sd,
                      double ar_coeff, std::uint64_t seed) {
  if (!(std::abs(ar_coeff) < 1.0)) {
    throw std::invalid_argument(
        "simulate_far1: |a| must be < 1 for stationarity, got " +
        std::to_string(ar_coeff));
  }
  if (n < 1) throw std::invalid_argument("simulate_far1: n < 1");
  if (r < 1) throw std::invalid_argument("simulate_far1: r < 1");
  if (noise_sd < 0.0) {
    throw std::invalid_argument("simulate_far1: negative noise_sd");
  }
  const Eigen::MatrixXd factor = psd_factor(model.weight_cov);
  const double innov_scale = std::sqrt(1.0 - ar_coeff * ar_coeff);
  Dataset data;
  data.noise_sd = noise_sd;
  data.time_ordered = true;
  data.replicates.reserve(static_cast<std::size_t>(n));
  Eigen::VectorXd xi;
  for (int t = 0; t < n; ++t) {
    const ReplicateDraws draws = draw_replicate(model, r, noise_sd, seed, t);
    const Eigen::VectorXd innovation = factor * draws.raw_gauss;
    if (t == 0) {
      xi = innovation;  // exact stationary start, no burn-in
    } else {
      xi = ar_coeff * xi + innov_scale * innovation;
    }
    data.replicates.push_back(assemble_replicate(model, draws, xi));
  }
  return data;
}

}  // namespace sphcov
