#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/common.hpp"
#include "mvsde/ensemble.hpp"
#include "mvsde/field.hpp"
#include "mvsde/transport.hpp"

namespace mvsde {

static_assert(std::endian::native == std::endian::little,
              "binary dumps are little-endian; big-endian hosts are unsupported");

inline constexpr char kEnsembleMagic[4] = {'M', 'V', 'L', '1'};

/// One row per point, full round-trip precision.
template <class Scalar>
void ensemble_to_csv(const EnsembleT<Scalar>& ens, std::ostream& os) {
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    for (Eigen::Index j = 0; j < ens.dim(); ++j) os << (j ? "," : "") << ens.points()(i, j);
    os << "\n";
  }
}

template <class Scalar = double>
EnsembleT<Scalar> ensemble_from_csv(std::istream& is) {
  std::vector<std::vector<Scalar>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<Scalar> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(Scalar(std::stod(cell)));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ensemble_from_csv: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("ensemble_from_csv: no data");
  MatrixX<Scalar> pts(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) pts(i, j) = rows[i][j];
  return EnsembleT<Scalar>(std::move(pts));
}

/// Binary dump: magic "MVL1", uint64 d, uint64 M, then M*d doubles row-major.
inline void ensemble_to_binary(const Ensemble& ens, std::ostream& os) {
  os.write(kEnsembleMagic, 4);
  const std::uint64_t d = std::uint64_t(ens.dim()), m = std::uint64_t(ens.size());
  os.write(reinterpret_cast<const char*>(&d), 8);
  os.write(reinterpret_cast<const char*>(&m), 8);
  for (Eigen::Index i = 0; i < ens.size(); ++i)
    for (Eigen::Index j = 0; j < ens.dim(); ++j) {
      const double v = ens.points()(i, j);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
}

inline Ensemble ensemble_from_binary(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(kEnsembleMagic, 4))
    throw std::runtime_error("ensemble_from_binary: bad magic");
  std::uint64_t d = 0, m = 0;
  is.read(reinterpret_cast<char*>(&d), 8);
  is.read(reinterpret_cast<char*>(&m), 8);
  if (!is || d == 0 || m == 0) throw std::runtime_error("ensemble_from_binary: bad header");
  MatrixX<double> pts{Eigen::Index(m), Eigen::Index(d)};
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      double v;
      is.read(reinterpret_cast<char*>(&v), 8);
      if (!is) throw std::runtime_error("ensemble_from_binary: truncated payload");
      pts(i, j) = v;
    }
  return Ensemble(std::move(pts));
}

/// One row per (particle, node): i, t, x_0..x_{d-1}.
template <class Scalar>
void pathbundle_to_csv(const PathBundleT<Scalar>& b, std::ostream& os) {
  os << std::setprecision(17);
  os << "# particle,t";
  for (Eigen::Index j = 0; j < b.dim(); ++j) os << ",x" << j;
  os << "\n";
  for (Eigen::Index i = 0; i < b.particles(); ++i)
    for (std::size_t k = 0; k < b.snapshots.size(); ++k) {
      const double t = b.full() ? b.grid.node(int(k)) : (k == 0 ? b.grid.t_start() : b.grid.t_end());
      os << i << "," << t;
      for (Eigen::Index j = 0; j < b.dim(); ++j) os << "," << b.snapshots[k](i, j);
      os << "\n";
    }
}

/// (i, j, mass, cost) rows; permutation plans carry mass 1/M on (i, perm(i)).
template <class Scalar>
void coupling_plan_to_csv(const CouplingPlanT<Scalar>& plan, const EnsembleT<Scalar>& mu,
                          const EnsembleT<Scalar>& nu, std::ostream& os) {
  os << std::setprecision(17) << "# i,j,mass,cost\n";
  if (plan.method == CouplingMethod::sinkhorn) {
    for (Eigen::Index i = 0; i < plan.matrix.rows(); ++i)
      for (Eigen::Index j = 0; j < plan.matrix.cols(); ++j)
        os << i << "," << j << "," << plan.matrix(i, j) << ","
           << std::pow((mu.points().row(i) - nu.points().row(j)).norm(), plan.theta) << "\n";
    return;
  }
  const Scalar mass = Scalar(1) / Scalar(plan.permutation.size());
  for (Eigen::Index i = 0; i < plan.permutation.size(); ++i)
    os << i << "," << plan.permutation(i) << "," << mass << ","
       << std::pow((mu.points().row(i) - nu.points().row(plan.permutation(i))).norm(), plan.theta)
       << "\n";
}

/// Header names the lattice geometry; then one row of node values per time.
template <class Scalar>
void grid_field_to_csv(const GridFieldT<Scalar>& f, std::ostream& os) {
  os << std::setprecision(17);
  os << "# gridfield d=" << f.spatial_dim();
  os << " lo=";
  for (int a = 0; a < f.spatial_dim(); ++a) os << (a ? ";" : "") << f.box_lo(a);
  os << " hi=";
  for (int a = 0; a < f.spatial_dim(); ++a) os << (a ? ";" : "") << f.box_hi(a);
  os << " counts=";
  for (int a = 0; a < f.spatial_dim(); ++a) os << (a ? ";" : "") << f.counts(a);
  os << "\n";
  for (std::size_t k = 0; k < f.times.size(); ++k) {
    os << f.times[k];
    for (Eigen::Index i = 0; i < f.spatial_nodes(); ++i) os << "," << f.at(k, i);
    os << "\n";
  }
}

template <class Scalar = double>
GridFieldT<Scalar> grid_field_from_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("# gridfield", 0) != 0)
    throw std::runtime_error("grid_field_from_csv: missing header");
  auto field_of = [&](const std::string& key) {
    const auto pos = header.find(key + "=");
    if (pos == std::string::npos) throw std::runtime_error("grid_field_from_csv: missing " + key);
    const auto end = header.find(' ', pos);
    return header.substr(pos + key.size() + 1, end == std::string::npos ? end : end - pos - key.size() - 1);
  };
  auto split = [](const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ';')) out.push_back(std::stod(cell));
    return out;
  };
  const int d = std::stoi(field_of("d"));
  const auto lo = split(field_of("lo")), hi = split(field_of("hi")), counts = split(field_of("counts"));
  if (int(lo.size()) != d || int(hi.size()) != d || int(counts.size()) != d)
    throw std::runtime_error("grid_field_from_csv: header arity mismatch");

  GridFieldT<Scalar> f;
  f.box_lo = VectorX<Scalar>(d);
  f.box_hi = VectorX<Scalar>(d);
  f.counts = Eigen::VectorXi(d);
  for (int a = 0; a < d; ++a) {
    f.box_lo(a) = Scalar(lo[a]);
    f.box_hi(a) = Scalar(hi[a]);
    f.counts(a) = int(counts[a]);
  }
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    f.times.push_back(Scalar(std::stod(cell)));
    while (std::getline(ss, cell, ',')) f.values.push_back(Scalar(std::stod(cell)));
  }
  if (f.values.size() != f.times.size() * std::size_t(f.spatial_nodes()))
    throw std::runtime_error("grid_field_from_csv: value count mismatch");
  return f;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << content;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Flow export: per-node ensemble CSVs plus a manifest listing them.
template <class Scalar>
void measure_flow_to_directory(const MeasureFlowT<Scalar>& flow, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  manifest << "# node,t,file\n";
  for (int k = 0; k < flow.grid().n_nodes(); ++k) {
    const std::string name = "ensemble_" + std::to_string(k) + ".csv";
    std::ofstream os(dir / name);
    ensemble_to_csv(flow.at(k), os);
    manifest << k << "," << std::setprecision(17) << flow.grid().node(k) << "," << name << "\n";
  }
  write_text_file(dir / "manifest.csv", manifest.str());
}

}  // namespace mvsde
