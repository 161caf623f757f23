#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvsde/common.hpp"
#include "mvsde/grid.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

/// Membership in the pair class {(p,q): d/p + 2/q < 2}; the strict variant
/// tests d/p + 2/q < 1.
inline bool in_class_K(double p, double q, int d, bool strict = false) {
  if (!std::isfinite(p) || !std::isfinite(q)) throw std::invalid_argument("in_class_K: non-finite input");
  if (!(p > 1.0) || !(q > 1.0) || d < 1) throw std::invalid_argument("in_class_K: need p>1, q>1, d>=1");
  const double s = double(d) / p + 2.0 / q;
  return s < (strict ? 1.0 : 2.0);
}

struct PairClass {
  double p;
  double q;
  int d;
  bool member() const { return in_class_K(p, q, d, false); }
  bool member_strict() const { return in_class_K(p, q, d, true); }
};

/// Uniformly weighted empirical measure: M points in d-space, weight 1/M each.
template <class Scalar = double>
class EnsembleT {
 public:
  EnsembleT() = default;
  explicit EnsembleT(MatrixX<Scalar> points) : points_(std::move(points)) {
    if (points_.rows() < 1 || points_.cols() < 1)
      throw std::invalid_argument("Ensemble: need at least one point and one dimension");
    if (!points_.allFinite()) throw std::invalid_argument("Ensemble: non-finite coordinate");
  }

  static EnsembleT dirac(const VectorX<Scalar>& x, Eigen::Index m) {
    MatrixX<Scalar> pts(m, x.size());
    pts.rowwise() = x.transpose();
    return EnsembleT(std::move(pts));
  }

  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }
  const MatrixX<Scalar>& points() const { return points_; }
  VectorX<Scalar> point(Eigen::Index i) const { return points_.row(i).transpose(); }
  VectorX<Scalar> mean() const { return points_.colwise().mean().transpose(); }

 private:
  MatrixX<Scalar> points_;
};

using Ensemble = EnsembleT<double>;

/// (1/M) sum |x_i|^theta.
template <class Scalar>
Scalar moment(const EnsembleT<Scalar>& ens, Scalar theta) {
  if (!(theta >= Scalar(1))) throw std::invalid_argument("moment: theta >= 1 required");
  if (ens.size() == 0) throw std::invalid_argument("moment: empty ensemble");
  return ens.points().rowwise().norm().array().pow(theta).mean();
}

/// Draws M iid points: kind-specific sampling through the counter-based
/// generator, so ensembles are reproducible per (seed, index).
template <class Scalar = double>
EnsembleT<Scalar> sample_gaussian_ensemble(Eigen::Index m, Eigen::Index d, const VectorX<Scalar>& mean,
                                           Scalar stddev, std::uint64_t seed) {
  NormalField nf(seed);
  MatrixX<Scalar> pts(m, d);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      pts(i, j) = mean(j) + stddev * Scalar(nf.normal(std::uint32_t(i), 0u, std::uint32_t(j)));
  return EnsembleT<Scalar>(std::move(pts));
}

template <class Scalar = double>
EnsembleT<Scalar> sample_uniform_ensemble(Eigen::Index m, Eigen::Index d, const VectorX<Scalar>& lo,
                                          const VectorX<Scalar>& hi, std::uint64_t seed) {
  NormalField nf(seed);
  MatrixX<Scalar> pts(m, d);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      pts(i, j) = lo(j) + (hi(j) - lo(j)) * Scalar(nf.uniform(std::uint32_t(i), 0u, std::uint32_t(j)));
  return EnsembleT<Scalar>(std::move(pts));
}

/// Time-indexed family of ensembles, one per grid node.
template <class Scalar = double>
class MeasureFlowT {
 public:
  MeasureFlowT(TimeGrid grid, std::vector<EnsembleT<Scalar>> ensembles)
      : grid_(grid), ensembles_(std::move(ensembles)) {
    if (Eigen::Index(ensembles_.size()) != grid_.n_nodes())
      throw std::invalid_argument("MeasureFlow: need one ensemble per grid node");
    for (const auto& e : ensembles_)
      if (e.dim() != ensembles_.front().dim())
        throw std::invalid_argument("MeasureFlow: mixed dimensions");
  }

  /// Flow frozen at a single measure (the Picard iteration's starting flow).
  static MeasureFlowT constant(const TimeGrid& grid, const EnsembleT<Scalar>& mu) {
    return MeasureFlowT(grid, std::vector<EnsembleT<Scalar>>(grid.n_nodes(), mu));
  }

  const TimeGrid& grid() const { return grid_; }
  Eigen::Index dim() const { return ensembles_.front().dim(); }
  const EnsembleT<Scalar>& at(int k) const { return ensembles_.at(k); }
  const std::vector<EnsembleT<Scalar>>& ensembles() const { return ensembles_; }

 private:
  TimeGrid grid_;
  std::vector<EnsembleT<Scalar>> ensembles_;
};

using MeasureFlow = MeasureFlowT<double>;

/// Particle trajectories plus the Brownian increments that generated them.
/// Snapshots are node-major (n_steps+1 matrices of shape M x d); increments
/// are step-major (n_steps matrices of shape M x d). Lean runs may drop
/// interior snapshots and noise; `full()` tells which.
template <class Scalar = double>
struct PathBundleT {
  TimeGrid grid{0.0, 1.0, 1};
  std::vector<MatrixX<Scalar>> snapshots;   // size n_nodes when full, else {initial, terminal}
  std::vector<MatrixX<Scalar>> increments;  // size n_steps when full, else empty
  std::uint64_t seed = 0;

  bool full() const { return Eigen::Index(snapshots.size()) == grid.n_nodes(); }
  Eigen::Index particles() const { return snapshots.front().rows(); }
  Eigen::Index dim() const { return snapshots.front().cols(); }
  const MatrixX<Scalar>& initial() const { return snapshots.front(); }
  const MatrixX<Scalar>& terminal() const { return snapshots.back(); }

  EnsembleT<Scalar> ensemble_at(int k) const {
    if (!full()) throw std::logic_error("PathBundle: interior snapshots were not retained");
    return EnsembleT<Scalar>(snapshots.at(k));
  }

  /// Sample variance of increments over steps and particles, divided by dt,
  /// per coordinate. Should sit near 1 for Brownian increments.
  VectorX<Scalar> noise_variance_ratio() const {
    if (increments.empty()) throw std::logic_error("PathBundle: increments were not retained");
    const Scalar dt = grid.dt();
    VectorX<Scalar> out(dim());
    for (Eigen::Index j = 0; j < dim(); ++j) {
      Scalar sum = 0, sumsq = 0;
      std::int64_t n = 0;
      for (const auto& step : increments) {
        sum += step.col(j).sum();
        sumsq += step.col(j).squaredNorm();
        n += step.rows();
      }
      const Scalar mu = sum / Scalar(n);
      out(j) = (sumsq / Scalar(n) - mu * mu) / dt;
    }
    return out;
  }
};

using PathBundle = PathBundleT<double>;

}  // namespace mvsde
