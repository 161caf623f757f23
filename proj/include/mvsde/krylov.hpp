#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mvsde/common.hpp"
#include "mvsde/ensemble.hpp"
#include "mvsde/field.hpp"
#include "mvsde/simulate.hpp"

namespace mvsde {

namespace detail {

/// Trapezoidal path integral of f along each trajectory over [s, t]; s and t
/// must be grid nodes, so adjacent intervals add exactly.
template <class Scalar>
VectorX<Scalar> path_integrals(const PathBundleT<Scalar>& paths, const GridFieldT<Scalar>& f,
                               Scalar s, Scalar t) {
  if (!paths.full()) throw std::invalid_argument("krylov: full path snapshots required");
  const int ks = paths.grid.node_index(double(s));
  const int kt = paths.grid.node_index(double(t));
  if (ks > kt) throw std::invalid_argument("krylov: need s <= t");
  const Scalar dt = Scalar(paths.grid.dt());
  const Eigen::Index m = paths.particles();

  VectorX<Scalar> node_vals(m), acc = VectorX<Scalar>::Zero(m), prev(m);
  for (int k = ks; k <= kt; ++k) {
    const Scalar tk = Scalar(paths.grid.node(k));
    for (Eigen::Index i = 0; i < m; ++i) {
      const Scalar v = f.eval(tk, paths.snapshots[k].row(i).transpose());
      if (v < Scalar(0)) throw std::invalid_argument("krylov: f must be nonnegative");
      node_vals(i) = v;
    }
    if (k > ks) acc += (prev + node_vals) * (dt / 2);
    prev = node_vals;
  }
  return acc;
}

}  // namespace detail

/// Monte Carlo mean of the occupation functional int_s^t f_r(X_r) dr.
template <class Scalar>
Estimate<Scalar> occupation_functional(const PathBundleT<Scalar>& paths, const GridFieldT<Scalar>& f,
                                       Scalar s, Scalar t) {
  return mean_with_se<Scalar>(detail::path_integrals(paths, f, s, t));
}

template <class Scalar>
struct KrylovLadderPoint {
  Scalar s{}, t{};
  Scalar estimate{}, se{};
  Scalar residual{};  // log estimate minus fitted line
};

template <class Scalar>
struct KrylovFit {
  Scalar delta_hat{};
  Scalar c_hat{};
  Scalar lpq_norm_value{};
  bool delta_positive = false;
  std::vector<KrylovLadderPoint<Scalar>> points;
};

/// Nested intervals (0, T 2^-j) snapped to grid nodes, longest first.
inline std::vector<std::pair<double, double>> default_interval_ladder(const TimeGrid& grid,
                                                                      int levels = 8) {
  std::vector<std::pair<double, double>> out;
  for (int j = 0; j < levels; ++j) {
    const double len = (grid.t_end() - grid.t_start()) / double(1 << j);
    const int k = int(std::llround(len / grid.dt()));
    if (k < 1) break;
    out.emplace_back(grid.t_start(), grid.t_start() + k * grid.dt());
  }
  if (out.size() < 4)
    throw std::invalid_argument("default_interval_ladder: grid too coarse for a 4-point ladder");
  return out;
}

/// Least-squares fit of log E int_s^t f(X_r) dr against log(t-s): slope
/// delta_hat and the worst-case constant C_hat = max estimate / ((t-s)^delta
/// ||f||_{L^q_p(T)}).
template <class Scalar>
KrylovFit<Scalar> krylov_fit(const PathBundleT<Scalar>& paths, const GridFieldT<Scalar>& f, Scalar p,
                             Scalar q, const std::vector<std::pair<double, double>>& ladder) {
  if (!in_class_K(double(p), double(q), int(paths.dim())))
    throw std::invalid_argument("krylov_fit: (p, q) not in the admissible pair class");
  if (ladder.size() < 4) throw std::invalid_argument("krylov_fit: need at least 4 ladder points");

  KrylovFit<Scalar> fit;
  fit.lpq_norm_value = lpq_norm(f, p, q, Scalar(paths.grid.t_start()), Scalar(paths.grid.t_end()));

  Scalar sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [s, t] : ladder) {
    const auto est = occupation_functional(paths, f, Scalar(s), Scalar(t));
    if (!(est.value > Scalar(0)))
      throw std::invalid_argument("krylov_fit: vanishing occupation estimate on the ladder");
    KrylovLadderPoint<Scalar> pt;
    pt.s = Scalar(s);
    pt.t = Scalar(t);
    pt.estimate = est.value;
    pt.se = est.se;
    fit.points.push_back(pt);
    const Scalar x = std::log(Scalar(t - s)), y = std::log(est.value);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const Scalar n = Scalar(fit.points.size());
  fit.delta_hat = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const Scalar intercept = (sy - fit.delta_hat * sx) / n;
  fit.delta_positive = fit.delta_hat > Scalar(0);

  fit.c_hat = Scalar(0);
  for (auto& pt : fit.points) {
    pt.residual = std::log(pt.estimate) - (intercept + fit.delta_hat * std::log(pt.t - pt.s));
    fit.c_hat = std::max(fit.c_hat, pt.estimate / (std::pow(pt.t - pt.s, fit.delta_hat) *
                                                   fit.lpq_norm_value));
  }
  return fit;
}

template <class Scalar>
struct KhasminskiiReport {
  Estimate<Scalar> exponential;      // E exp(lambda int f)
  Scalar delta_hat{};                // from an internal occupation fit
  std::vector<Scalar> moments;       // E (int f)^n, n = 1..4
  std::vector<Scalar> envelopes;     // n! (t-s)^{delta n} ||f||^n
  std::vector<Scalar> implied_c;     // moment / envelope
};

/// Exponential-moment estimate E exp(lambda int_0^T f(X_r) dr) with the
/// moment chain reported against factorial envelopes.
template <class Scalar>
KhasminskiiReport<Scalar> khasminskii_exp(const PathBundleT<Scalar>& paths,
                                          const GridFieldT<Scalar>& f, Scalar lambda, Scalar p = 2,
                                          Scalar q = 4) {
  if (!(lambda > 0)) throw std::invalid_argument("khasminskii_exp: lambda > 0 required");
  const Scalar s = Scalar(paths.grid.t_start()), t = Scalar(paths.grid.t_end());
  const VectorX<Scalar> integrals = detail::path_integrals(paths, f, s, t);
  if ((lambda * integrals.maxCoeff()) > Scalar(700))
    throw std::overflow_error("khasminskii_exp: exponent overflow; use a smaller lambda");

  KhasminskiiReport<Scalar> rep;
  rep.exponential = mean_with_se<Scalar>((lambda * integrals).array().exp().matrix().eval());

  Scalar delta = std::numeric_limits<Scalar>::quiet_NaN(), norm = delta;
  try {
    const auto fit = krylov_fit(paths, f, p, q, default_interval_ladder(paths.grid));
    delta = fit.delta_hat;
    norm = fit.lpq_norm_value;
  } catch (const std::invalid_argument&) {
    // vanishing occupation or too-coarse grid: no envelope fit
  }
  rep.delta_hat = delta;
  Scalar factorial = 1;
  for (int n = 1; n <= 4; ++n) {
    factorial *= n;
    rep.moments.push_back(integrals.array().pow(Scalar(n)).mean());
    rep.envelopes.push_back(factorial * std::pow(t - s, delta * n) * std::pow(norm, Scalar(n)));
    rep.implied_c.push_back(rep.moments.back() / rep.envelopes.back());
  }
  return rep;
}

template <class Scalar>
struct MarkovSpotCheck {
  Estimate<Scalar> original;    // occupation over [s, t] along the original paths
  Estimate<Scalar> restarted;   // same functional, paths restarted from the time-s states
  Scalar z_score{};
};

/// The conditional estimate is verified in unconditional form; this restarts
/// a subsample from its time-s states with fresh noise and compares.
template <class Scalar>
MarkovSpotCheck<Scalar> markov_spot_check(const CoefficientSpecT<Scalar>& spec,
                                          const PathBundleT<Scalar>& paths,
                                          const GridFieldT<Scalar>& f, Scalar s, Scalar t,
                                          std::uint64_t seed, Eigen::Index subsample = 0) {
  const int ks = paths.grid.node_index(double(s));
  const int kt = paths.grid.node_index(double(t));
  const Eigen::Index m = subsample > 0 ? std::min(subsample, paths.particles()) : paths.particles();

  MarkovSpotCheck<Scalar> rep;
  rep.original =
      mean_with_se<Scalar>(VectorX<Scalar>(detail::path_integrals(paths, f, s, t).head(m)));
  const EnsembleT<Scalar> start(paths.snapshots[ks].topRows(m));
  const TimeGrid sub(double(s), double(t), kt - ks);
  RunOptions opts;
  opts.keep_noise = false;
  const auto restarted = euler_frozen(spec, nullptr, start, sub, seed, opts);
  rep.restarted = mean_with_se<Scalar>(detail::path_integrals(restarted, f, Scalar(sub.t_start()),
                                                              Scalar(sub.t_end())));
  const Scalar se = std::sqrt(rep.original.se * rep.original.se + rep.restarted.se * rep.restarted.se);
  rep.z_score = se > 0 ? (rep.original.value - rep.restarted.value) / se : Scalar(0);
  return rep;
}

}  // namespace mvsde
