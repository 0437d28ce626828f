#pragma once

#include <cstdint>
#include <string>

#include "sphcov/estimators.hpp"
#include "sphcov/model_selection.hpp"
#include "sphcov/postprocess.hpp"
#include "sphcov/simulation.hpp"

namespace sphcov {

// Dataset CSV (header "replicate,x,y,z,w", 17 significant digits) plus a
// JSON metadata sidecar {n, r_list, sigma, seed, time_ordered}.
void save_dataset(const Dataset& data, std::uint64_t seed,
                  const std::string& csv_path, const std::string& meta_path);
Dataset load_dataset(const std::string& csv_path, const std::string& meta_path);

// Source model JSON: sources, weight_cov, kernel spec.
void save_model(const SourceModel& model, const std::string& path);
SourceModel load_model(const std::string& path);

// Kernel spec JSON: {"kind":"sobolev","p":..,"L_max":..} or
// {"kind":"matern","nu":..,"eps":..}.
std::string kernel_spec_to_json(const ZonalKernel& kernel);
ZonalKernel kernel_from_json(const std::string& spec);

// Estimates: one file, a JSON header line followed by a CSV body of
// (location, weight) records (evaluation weights, normalization folded in).
void save_mean_estimate(const MeanEstimate& est, const std::string& path);
MeanEstimate load_mean_estimate(const std::string& path);
void save_second_moment_estimate(const SecondMomentEstimate& est,
                                 const std::string& path);
SecondMomentEstimate load_second_moment_estimate(const std::string& path);

// Grid fields: nodes CSV "x,y,z,weight" plus a row-major values CSV (%.12e).
void save_grid_field(const GridField& field, const std::string& nodes_path,
                     const std::string& values_path);
GridField load_grid_field(const std::string& nodes_path,
                          const std::string& values_path);

// CV report JSON {eta_grid, scores, selected_eta, per_fold, seed} and a
// (eta, score) CSV for plotting.
void save_cv_report(const CVReport& report, const std::string& json_path,
                    const std::string& csv_path);
CVReport load_cv_report(const std::string& json_path);

void save_fit_report(const FitReport& report, double eta, int lag,
                     const std::string& path);

}  // namespace sphcov
