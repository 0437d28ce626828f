#include "sphcov/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sphcov/errors.hpp"

namespace sphcov {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt12e(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12e", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  return in;
}

std::vector<double> split_csv_row(const std::string& line,
                                  const std::string& path) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw io_error("bad numeric cell '" + cell + "' in " + path);
    }
  }
  return out;
}

json kernel_to_json_obj(const ZonalKernel& kernel) {
  if (kernel.kind() == ZonalKernel::Kind::kMatern) {
    return json{{"kind", "matern"}, {"nu", kernel.nu()}, {"eps", kernel.eps()}};
  }
  return json{{"kind", "sobolev"},
              {"p", kernel.growth_order()},
              {"L_max", kernel.l_max()}};
}

ZonalKernel kernel_from_json_obj(const json& spec) {
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "matern") {
    return matern_zonal(spec.at("nu").get<double>(),
                        spec.at("eps").get<double>());
  }
  if (kind == "sobolev") {
    return green_kernel_dstar_d(sobolev_operator(
        spec.at("p").get<double>(), spec.value("L_max", 256)));
  }
  throw io_error("unknown kernel kind '" + kind + "'");
}

}  // namespace

std::string kernel_spec_to_json(const ZonalKernel& kernel) {
  return kernel_to_json_obj(kernel).dump();
}

ZonalKernel kernel_from_json(const std::string& spec) {
  try {
    return kernel_from_json_obj(json::parse(spec));
  } catch (const json::exception& e) {
    throw io_error(std::string("bad kernel spec: ") + e.what());
  }
}

void save_dataset(const Dataset& data, std::uint64_t seed,
                  const std::string& csv_path, const std::string& meta_path) {
  auto csv = open_out(csv_path);
  csv << "replicate,x,y,z,w\n";
  for (std::size_t i = 0; i < data.replicates.size(); ++i) {
    const auto& rep = data.replicates[i];
    for (std::size_t j = 0; j < rep.locations.size(); ++j) {
      const auto& u = rep.locations[j];
      csv << (i + 1) << ',' << fmt17(u.x) << ',' << fmt17(u.y) << ','
          << fmt17(u.z) << ',' << fmt17(rep.values[j]) << "\n";
    }
  }
  if (!csv) throw io_error("failed while writing " + csv_path);

  json meta;
  meta["n"] = data.n();
  std::vector<int> r_list;
  for (const auto& rep : data.replicates) {
    r_list.push_back(static_cast<int>(rep.locations.size()));
  }
  meta["r_list"] = r_list;
  meta["sigma"] = data.noise_sd;
  meta["seed"] = seed;
  meta["time_ordered"] = data.time_ordered;
  auto out = open_out(meta_path);
  out << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::string& csv_path,
                     const std::string& meta_path) {
  json meta;
  {
    auto in = open_in(meta_path);
    try {
      in >> meta;
    } catch (const json::exception& e) {
      throw io_error("bad metadata " + meta_path + ": " + e.what());
    }
  }
  Dataset data;
  data.noise_sd = meta.at("sigma").get<double>();
  data.time_ordered = meta.at("time_ordered").get<bool>();
  const int n = meta.at("n").get<int>();
  data.replicates.resize(static_cast<std::size_t>(n));

  auto in = open_in(csv_path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("replicate,", 0) != 0) {
    throw io_error("missing dataset header in " + csv_path);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<double> cells = split_csv_row(line, csv_path);
    if (cells.size() != 5) throw io_error("bad dataset row in " + csv_path);
    const int i = static_cast<int>(cells[0]);
    if (i < 1 || i > n) throw io_error("replicate index out of range");
    auto& rep = data.replicates[static_cast<std::size_t>(i - 1)];
    rep.locations.push_back({cells[1], cells[2], cells[3]});
    rep.values.push_back(cells[4]);
  }
  const auto r_list = meta.at("r_list").get<std::vector<int>>();
  if (static_cast<int>(r_list.size()) != n) {
    throw io_error("metadata r_list length mismatch");
  }
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(data.replicates[static_cast<std::size_t>(i)]
                             .locations.size()) != r_list[static_cast<std::size_t>(i)]) {
      throw io_error("dataset rows disagree with metadata r_list");
    }
  }
  validate_dataset(data, /*for_covariance=*/false);
  return data;
}

void save_model(const SourceModel& model, const std::string& path) {
  json doc;
  auto& sources = doc["sources"];
  for (const auto& v : model.sources) {
    sources.push_back({v.x, v.y, v.z});
  }
  auto& cov = doc["weight_cov"];
  for (Eigen::Index i = 0; i < model.weight_cov.rows(); ++i) {
    json row;
    for (Eigen::Index j = 0; j < model.weight_cov.cols(); ++j) {
      row.push_back(model.weight_cov(i, j));
    }
    cov.push_back(row);
  }
  doc["kernel"] = kernel_to_json_obj(model.kernel);
  auto out = open_out(path);
  out << doc.dump(2) << "\n";
}

SourceModel load_model(const std::string& path) {
  json doc;
  {
    auto in = open_in(path);
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw io_error("bad model file " + path + ": " + e.what());
    }
  }
  std::vector<SphericalPoint> sources;
  for (const auto& v : doc.at("sources")) {
    sources.push_back(make_unit(v.at(0).get<double>(), v.at(1).get<double>(),
                                v.at(2).get<double>()));
  }
  const auto& cov = doc.at("weight_cov");
  const Eigen::Index q = static_cast<Eigen::Index>(cov.size());
  Eigen::MatrixXd weight_cov(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const auto& row = cov.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != q) {
      throw io_error("weight_cov is not square in " + path);
    }
    for (Eigen::Index j = 0; j < q; ++j) {
      weight_cov(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
    }
  }
  return make_source_model(std::move(sources), std::move(weight_cov),
                           kernel_from_json_obj(doc.at("kernel")));
}

void save_mean_estimate(const MeanEstimate& est, const std::string& path) {
  auto out = open_out(path);
  json header;
  header["type"] = "mean";
  header["kernel"] = kernel_to_json_obj(est.kernel);
  header["eta"] = est.eta;
  header["n"] = static_cast<int>(est.r_list.size());
  header["r_list"] = est.r_list;
  out << header.dump() << "\n";
  out << "x,y,z,weight\n";
  for (Eigen::Index m = 0; m < est.eval_weights.size(); ++m) {
    const auto& u = est.locations[static_cast<std::size_t>(m)];
    out << fmt17(u.x) << ',' << fmt17(u.y) << ',' << fmt17(u.z) << ','
        << fmt17(est.eval_weights[m]) << "\n";
  }
  if (!out) throw io_error("failed while writing " + path);
}

MeanEstimate load_mean_estimate(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty estimate file " + path);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw io_error("bad estimate header in " + path + ": " + e.what());
  }
  if (header.at("type") != "mean") {
    throw io_error(path + " is not a mean estimate");
  }
  MeanEstimate est;
  est.kernel = kernel_from_json_obj(header.at("kernel"));
  est.eta = header.at("eta").get<double>();
  est.r_list = header.at("r_list").get<std::vector<int>>();
  if (!std::getline(in, line) || line != "x,y,z,weight") {
    throw io_error("missing estimate body header in " + path);
  }
  std::vector<double> weights;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_row(line, path);
    if (cells.size() != 4) throw io_error("bad estimate row in " + path);
    est.locations.push_back({cells[0], cells[1], cells[2]});
    weights.push_back(cells[3]);
  }
  est.eval_weights =
      Eigen::Map<const Eigen::VectorXd>(weights.data(),
                                        static_cast<Eigen::Index>(weights.size()));
  // Representer weights recover from the stored evaluation weights.
  est.alpha = est.eval_weights;
  Eigen::Index pos = 0;
  for (int ri : est.r_list) {
    const double s = std::sqrt(static_cast<double>(ri));
    for (int j = 0; j < ri; ++j, ++pos) est.alpha[pos] *= s;
  }
  if (pos != est.alpha.size()) {
    throw io_error("estimate body disagrees with r_list in " + path);
  }
  return est;
}

void save_second_moment_estimate(const SecondMomentEstimate& est,
                                 const std::string& path) {
  auto out = open_out(path);
  json header;
  header["type"] = "second_moment";
  header["kernel"] = kernel_to_json_obj(est.kernel);
  header["eta"] = est.eta;
  header["lag"] = est.lag;
  header["n"] = est.n;
  header["r"] = est.r;
  header["transposed"] = est.transposed;
  out << header.dump() << "\n";
  out << "x1,y1,z1,x2,y2,z2,weight\n";
  for (Eigen::Index m = 0; m < est.eval_weights.size(); ++m) {
    const auto& a = est.x[static_cast<std::size_t>(m)];
    const auto& b = est.y[static_cast<std::size_t>(m)];
    out << fmt17(a.x) << ',' << fmt17(a.y) << ',' << fmt17(a.z) << ','
        << fmt17(b.x) << ',' << fmt17(b.y) << ',' << fmt17(b.z) << ','
        << fmt17(est.eval_weights[m]) << "\n";
  }
  if (!out) throw io_error("failed while writing " + path);
}

SecondMomentEstimate load_second_moment_estimate(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty estimate file " + path);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw io_error("bad estimate header in " + path + ": " + e.what());
  }
  if (header.at("type") != "second_moment") {
    throw io_error(path + " is not a second-moment estimate");
  }
  SecondMomentEstimate est;
  est.kernel = kernel_from_json_obj(header.at("kernel"));
  est.eta = header.at("eta").get<double>();
  est.lag = header.at("lag").get<int>();
  est.n = header.at("n").get<int>();
  est.r = header.at("r").get<int>();
  est.transposed = header.at("transposed").get<bool>();
  if (!std::getline(in, line) || line != "x1,y1,z1,x2,y2,z2,weight") {
    throw io_error("missing estimate body header in " + path);
  }
  std::vector<double> weights;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_row(line, path);
    if (cells.size() != 7) throw io_error("bad estimate row in " + path);
    est.x.push_back({cells[0], cells[1], cells[2]});
    est.y.push_back({cells[3], cells[4], cells[5]});
    weights.push_back(cells[6]);
  }
  est.eval_weights =
      Eigen::Map<const Eigen::VectorXd>(weights.data(),
                                        static_cast<Eigen::Index>(weights.size()));
  est.beta = est.eval_weights;  // solver-convention weights are not persisted
  return est;
}

void save_grid_field(const GridField& field, const std::string& nodes_path,
                     const std::string& values_path) {
  {
    auto out = open_out(nodes_path);
    out << "x,y,z,weight\n";
    for (std::size_t i = 0; i < field.grid.size(); ++i) {
      const auto& u = field.grid.nodes[i];
      out << fmt17(u.x) << ',' << fmt17(u.y) << ',' << fmt17(u.z) << ','
          << fmt17(field.grid.weights[i]) << "\n";
    }
    if (!out) throw io_error("failed while writing " + nodes_path);
  }
  auto out = open_out(values_path);
  for (Eigen::Index i = 0; i < field.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < field.values.cols(); ++j) {
      if (j) out << ',';
      out << fmt12e(field.values(i, j));
    }
    out << "\n";
  }
  if (!out) throw io_error("failed while writing " + values_path);
}

GridField load_grid_field(const std::string& nodes_path,
                          const std::string& values_path) {
  GridField field;
  {
    auto in = open_in(nodes_path);
    std::string line;
    if (!std::getline(in, line) || line != "x,y,z,weight") {
      throw io_error("missing nodes header in " + nodes_path);
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_row(line, nodes_path);
      if (cells.size() != 4) throw io_error("bad node row in " + nodes_path);
      field.grid.nodes.push_back({cells[0], cells[1], cells[2]});
      field.grid.weights.push_back(cells[3]);
    }
  }
  std::vector<std::vector<double>> rows;
  {
    auto in = open_in(values_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      rows.push_back(split_csv_row(line, values_path));
    }
  }
  const Eigen::Index n_rows = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index n_cols =
      n_rows > 0 ? static_cast<Eigen::Index>(rows.front().size()) : 0;
  if (n_rows != static_cast<Eigen::Index>(field.grid.size())) {
    throw io_error("value rows disagree with grid size in " + values_path);
  }
  field.values.resize(n_rows, n_cols);
  for (Eigen::Index i = 0; i < n_rows; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) !=
        n_cols) {
      throw io_error("ragged value rows in " + values_path);
    }
    for (Eigen::Index j = 0; j < n_cols; ++j) {
      field.values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  field.bivariate = n_cols == n_rows && n_cols > 1;
  return field;
}

void save_cv_report(const CVReport& report, const std::string& json_path,
                    const std::string& csv_path) {
  json doc;
  doc["eta_grid"] = report.eta_grid;
  doc["scores"] = report.mean_scores;
  doc["selected_eta"] = report.selected_eta;
  doc["seed"] = report.shuffle_seed;
  doc["warnings"] = report.warnings;
  auto& folds = doc["per_fold"];
  for (Eigen::Index f = 0; f < report.per_fold.rows(); ++f) {
    json row;
    for (Eigen::Index e = 0; e < report.per_fold.cols(); ++e) {
      row.push_back(report.per_fold(f, e));
    }
    folds.push_back(row);
  }
  {
    auto out = open_out(json_path);
    out << doc.dump(2) << "\n";
  }
  auto out = open_out(csv_path);
  out << "eta,score\n";
  for (std::size_t e = 0; e < report.eta_grid.size(); ++e) {
    out << fmt17(report.eta_grid[e]) << ',' << fmt17(report.mean_scores[e])
        << "\n";
  }
  if (!out) throw io_error("failed while writing " + csv_path);
}

CVReport load_cv_report(const std::string& json_path) {
  json doc;
  {
    auto in = open_in(json_path);
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw io_error("bad CV report " + json_path + ": " + e.what());
    }
  }
  CVReport report;
  report.eta_grid = doc.at("eta_grid").get<std::vector<double>>();
  report.mean_scores = doc.at("scores").get<std::vector<double>>();
  report.selected_eta = doc.at("selected_eta").get<double>();
  report.shuffle_seed = doc.at("seed").get<std::uint64_t>();
  report.warnings = doc.at("warnings").get<std::vector<std::string>>();
  const auto& folds = doc.at("per_fold");
  report.per_fold.resize(static_cast<Eigen::Index>(folds.size()),
                         static_cast<Eigen::Index>(report.eta_grid.size()));
  for (Eigen::Index f = 0; f < report.per_fold.rows(); ++f) {
    const auto& row = folds.at(static_cast<std::size_t>(f));
    for (Eigen::Index e = 0; e < report.per_fold.cols(); ++e) {
      report.per_fold(f, e) = row.at(static_cast<std::size_t>(e)).get<double>();
    }
  }
  return report;
}

void save_fit_report(const FitReport& report, double eta, int lag,
                     const std::string& path) {
  json doc;
  doc["eta"] = eta;
  doc["lag"] = lag;
  doc["path"] = report.path;
  doc["system_dim"] = report.system_dim;
  doc["j_nnz_fraction"] = report.j_nnz_fraction;
  doc["h_nnz"] = report.h_nnz;
  doc["cg_iterations"] = report.cg_iterations;
  doc["cg_rel_residual"] = report.cg_rel_residual;
  doc["timings"] = {{"assembly_seconds", report.assembly_seconds},
                    {"solve_seconds", report.solve_seconds}};
  if (report.gram_condition_ratio >= 0.0) {
    doc["gram_condition_ratio"] = report.gram_condition_ratio;
    doc["ill_conditioned"] = report.ill_conditioned;
  }
  auto out = open_out(path);
  out << doc.dump(2) << "\n";
}

}  // namespace sphcov
