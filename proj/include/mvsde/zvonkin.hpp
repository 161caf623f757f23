#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mvsde/coefficients.hpp"
#include "mvsde/common.hpp"
#include "mvsde/field.hpp"
#include "mvsde/simulate.hpp"

namespace mvsde {

struct PdeLattice {
  double t_end = 1.0;
  int n_time = 1000;   // time cells
  double x_lo = -6.0;
  double x_hi = 6.0;
  int n_space = 400;   // space cells
};

enum class PdeScheme { implicit_euler, explicit_euler };

/// Backward solve of du/dt + (sigma^2/2) u'' + b u' + b = lambda u with
/// u(T) = 0 in one space dimension. Implicit (backward Euler in time,
/// centered in space) by default; the explicit mode cross-validates and
/// enforces sigma^2 dt/dx^2 <= 1/2. Box edges carry the spatially-constant
/// drift-only ODE solution, exact for drifts that are constant outside the
/// box.
template <class Scalar>
GridFieldT<Scalar> solve_backward_pde(const std::function<Scalar(Scalar, Scalar)>& b,
                                      const std::function<Scalar(Scalar, Scalar)>& sigma,
                                      Scalar lambda, const PdeLattice& lat,
                                      PdeScheme scheme = PdeScheme::implicit_euler) {
  const int nt = lat.n_time, nx = lat.n_space;
  const Scalar dt = Scalar(lat.t_end) / nt;
  const Scalar dx = Scalar(lat.x_hi - lat.x_lo) / nx;

  GridFieldT<Scalar> u;
  u.times.resize(nt + 1);
  for (int k = 0; k <= nt; ++k) u.times[k] = Scalar(lat.t_end) * k / nt;
  u.box_lo = VectorX<Scalar>::Constant(1, Scalar(lat.x_lo));
  u.box_hi = VectorX<Scalar>::Constant(1, Scalar(lat.x_hi));
  u.counts = Eigen::VectorXi::Constant(1, nx + 1);
  u.values.assign(std::size_t(nt + 1) * (nx + 1), Scalar(0));  // u(T) = 0

  auto node_x = [&](int j) { return Scalar(lat.x_lo) + j * dx; };

  if (scheme == PdeScheme::explicit_euler) {
    for (int k = 0; k < nt; ++k)
      for (int j = 0; j <= nx; ++j) {
        const Scalar s = sigma(u.times[k + 1], node_x(j));
        if (s * s * dt / (dx * dx) > Scalar(0.5) + Scalar(1e-12))
          throw std::invalid_argument("solve_backward_pde: explicit stability violated");
      }
  }

  std::vector<Scalar> lower(nx + 1), diag(nx + 1), upper(nx + 1), rhs(nx + 1), scratch(nx + 1);
  for (int k = nt - 1; k >= 0; --k) {
    const Scalar tk = u.times[k];
    const auto prev = [&](int j) { return u.at(k + 1, j); };
    // boundary ODE u' = lambda u - b, backward Euler
    u.at(k, 0) = (prev(0) + dt * b(tk, node_x(0))) / (1 + lambda * dt);
    u.at(k, nx) = (prev(nx) + dt * b(tk, node_x(nx))) / (1 + lambda * dt);

    if (scheme == PdeScheme::explicit_euler) {
      const Scalar tk1 = u.times[k + 1];
      for (int j = 1; j < nx; ++j) {
        const Scalar x = node_x(j);
        const Scalar bv = b(tk1, x);
        const Scalar s2 = sigma(tk1, x) * sigma(tk1, x);
        const Scalar d2 = (prev(j + 1) - 2 * prev(j) + prev(j - 1)) / (dx * dx);
        const Scalar d1 = (prev(j + 1) - prev(j - 1)) / (2 * dx);
        u.at(k, j) = prev(j) + dt * (s2 / 2 * d2 + bv * d1 + bv - lambda * prev(j));
      }
      continue;
    }

    for (int j = 1; j < nx; ++j) {
      const Scalar x = node_x(j);
      const Scalar bv = b(tk, x);
      const Scalar s2 = sigma(tk, x) * sigma(tk, x);
      lower[j] = -dt * (s2 / (2 * dx * dx) - bv / (2 * dx));
      diag[j] = 1 + lambda * dt + dt * s2 / (dx * dx);
      upper[j] = -dt * (s2 / (2 * dx * dx) + bv / (2 * dx));
      rhs[j] = prev(j) + dt * bv;
    }
    rhs[1] -= lower[1] * u.at(k, 0);
    rhs[nx - 1] -= upper[nx - 1] * u.at(k, nx);

    // Thomas sweep over the interior nodes
    scratch[1] = upper[1] / diag[1];
    rhs[1] /= diag[1];
    for (int j = 2; j < nx; ++j) {
      const Scalar m = diag[j] - lower[j] * scratch[j - 1];
      scratch[j] = upper[j] / m;
      rhs[j] = (rhs[j] - lower[j] * rhs[j - 1]) / m;
    }
    u.at(k, nx - 1) = rhs[nx - 1];
    for (int j = nx - 2; j >= 1; --j) u.at(k, j) = rhs[j] - scratch[j] * u.at(k, j + 1);
  }
  return u;
}

template <class Scalar>
struct GradientBounds {
  Scalar sup_u{}, sup_grad{}, sup_hess{};
  Scalar sum() const { return sup_u + sup_grad + sup_hess; }
};

/// Sup norms of u, u', u'' over the interior lattice by central differences.
template <class Scalar>
GradientBounds<Scalar> gradient_bounds(const GridFieldT<Scalar>& u) {
  if (u.spatial_dim() != 1) throw std::invalid_argument("gradient_bounds: 1-d field required");
  GradientBounds<Scalar> gb;
  const Eigen::Index nx = u.counts(0);
  const Scalar dx = u.spacing(0);
  for (std::size_t k = 0; k < u.times.size(); ++k)
    for (Eigen::Index j = 0; j < nx; ++j) {
      gb.sup_u = std::max(gb.sup_u, std::abs(u.at(k, j)));
      if (j == 0 || j + 1 == nx) continue;
      gb.sup_grad = std::max(gb.sup_grad, std::abs(u.at(k, j + 1) - u.at(k, j - 1)) / (2 * dx));
      gb.sup_hess =
          std::max(gb.sup_hess, std::abs(u.at(k, j + 1) - 2 * u.at(k, j) + u.at(k, j - 1)) / (dx * dx));
    }
  return gb;
}

/// theta = id + u is a lattice diffeomorphism when x + u is strictly
/// increasing along every time row.
template <class Scalar>
bool theta_strictly_increasing(const GridFieldT<Scalar>& u) {
  const Eigen::Index nx = u.counts(0);
  const Scalar dx = u.spacing(0);
  for (std::size_t k = 0; k < u.times.size(); ++k)
    for (Eigen::Index j = 0; j + 1 < nx; ++j)
      if (!(dx + u.at(k, j + 1) - u.at(k, j) > Scalar(0))) return false;
  return true;
}

/// Smallest lambda (log-bisection) at which ||u|| + ||u'|| + ||u''|| drops
/// to the target, plus the bounds attained there.
template <class Scalar>
std::pair<Scalar, GradientBounds<Scalar>> lambda_threshold(
    const std::function<Scalar(Scalar, Scalar)>& b, const std::function<Scalar(Scalar, Scalar)>& sigma,
    const PdeLattice& lat, Scalar target = Scalar(0.2), Scalar lambda_lo = Scalar(1),
    Scalar lambda_hi = Scalar(4096)) {
  auto sum_at = [&](Scalar lam) { return gradient_bounds(solve_backward_pde(b, sigma, lam, lat)); };
  if (!(sum_at(lambda_hi).sum() <= target))
    throw std::runtime_error("lambda_threshold: target not attained at the upper end");
  if (sum_at(lambda_lo).sum() <= target) return {lambda_lo, sum_at(lambda_lo)};
  Scalar lo = lambda_lo, hi = lambda_hi;
  for (int it = 0; it < 24; ++it) {
    const Scalar mid = std::sqrt(lo * hi);
    if (sum_at(mid).sum() <= target)
      hi = mid;
    else
      lo = mid;
  }
  return {hi, sum_at(hi)};
}

/// Ito-consistency of the transformed dynamics: simulate X by Euler, set
/// A_k = theta_{t_k}(X_k) with theta = id + u, integrate B by Euler applied
/// to dB = lambda u(X) dt + (theta' sigma)(X) dW with the same increments,
/// and return the RMS of A - B over paths and nodes.
template <class Scalar>
Scalar ito_consistency(const GridFieldT<Scalar>& u, Scalar lambda,
                       const CoefficientSpecT<Scalar>& spec, const EnsembleT<Scalar>& x0,
                       const TimeGrid& grid, std::uint64_t seed, int threads = 1) {
  if (spec.dim != 1 || u.spatial_dim() != 1)
    throw std::invalid_argument("ito_consistency: 1-d only");
  if (grid.t_start() != 0.0 || grid.t_end() > u.times.back() + 1e-12)
    throw std::invalid_argument("ito_consistency: simulation grid exceeds the PDE lattice");

  // u' on the lattice, then both interpolated along the paths
  GridFieldT<Scalar> du = u;
  const Eigen::Index nx = u.counts(0);
  const Scalar dx = u.spacing(0);
  for (std::size_t k = 0; k < u.times.size(); ++k) {
    du.at(k, 0) = (u.at(k, 1) - u.at(k, 0)) / dx;
    du.at(k, nx - 1) = (u.at(k, nx - 1) - u.at(k, nx - 2)) / dx;
    for (Eigen::Index j = 1; j + 1 < nx; ++j)
      du.at(k, j) = (u.at(k, j + 1) - u.at(k, j - 1)) / (2 * dx);
  }

  RunOptions opts;
  opts.threads = threads;
  const auto paths = euler_frozen(spec, nullptr, x0, grid, seed, opts);
  const Eigen::Index m = paths.particles();
  const int n = grid.n_steps();
  const Scalar dt = Scalar(grid.dt());

  Scalar sq_sum = 0;
  std::int64_t count = 0;
  VectorX<Scalar> bvec(1), xv(1);
  MatrixX<Scalar> sig(1, 1);
  VectorX<Scalar> b_state(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Scalar x0i = paths.snapshots[0](i, 0);
    xv(0) = x0i;
    b_state(i) = x0i + u.eval(Scalar(0), xv);
  }
  for (int k = 0; k <= n; ++k) {
    const Scalar t = Scalar(grid.node(k));
    for (Eigen::Index i = 0; i < m; ++i) {
      xv(0) = paths.snapshots[k](i, 0);
      const Scalar a = xv(0) + u.eval(t, xv);
      const Scalar diff = a - b_state(i);
      sq_sum += diff * diff;
      ++count;
      if (k == n) continue;
      spec.diffusion(t, xv, nullptr, sig);
      const Scalar theta_prime = 1 + du.eval(t, xv);
      b_state(i) += lambda * u.eval(t, xv) * dt + theta_prime * sig(0, 0) * paths.increments[k](i, 0);
    }
  }
  return std::sqrt(sq_sum / Scalar(count));
}

}  // namespace mvsde
