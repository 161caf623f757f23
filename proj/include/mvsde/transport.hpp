#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mvsde/common.hpp"
#include "mvsde/ensemble.hpp"

namespace mvsde {

enum class CouplingMethod { sorted_1d, exact_assignment, sinkhorn };

/// Coupling between two equal-size uniform empirical measures. Exact methods
/// carry a permutation (mass 1/M on (i, perm[i])); Sinkhorn carries the dense
/// plan. `cost` is the theta-power transport cost, so W_theta = cost^(1/theta).
template <class Scalar = double>
struct CouplingPlanT {
  Eigen::VectorXi permutation;
  MatrixX<Scalar> matrix;
  Scalar cost{};
  Scalar theta{};
  CouplingMethod method{CouplingMethod::exact_assignment};

  Scalar distance() const { return std::pow(cost, Scalar(1) / theta); }
};

using CouplingPlan = CouplingPlanT<double>;

struct SinkhornError : std::runtime_error {
  explicit SinkhornError(double violation_)
      : std::runtime_error("sinkhorn did not converge; last marginal violation " +
                           std::to_string(violation_)),
        violation(violation_) {}
  double violation;
};

namespace detail {

/// Jonker-Volgenant shortest augmenting path, O(n^3). Ties resolve to the
/// lowest column index, which keeps runs reproducible.
template <class Scalar>
Eigen::VectorXi solve_assignment(const MatrixX<Scalar>& cost) {
  const int n = int(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("solve_assignment: square matrix required");
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> u(n + 1, Scalar(0)), v(n + 1, Scalar(0)), minv(n + 1);
  std::vector<int> p(n + 1, -1), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 0; i < n; ++i) {
    p[n] = i;
    int j0 = n;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), char(0));
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      Scalar delta = inf;
      int j1 = -1;
      for (int j = 0; j < n; ++j) {
        if (used[j]) continue;
        const Scalar cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != -1);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != n);
  }
  Eigen::VectorXi row_to_col(n);
  for (int j = 0; j < n; ++j) row_to_col(p[j]) = j;
  return row_to_col;
}

template <class Scalar>
MatrixX<Scalar> pairwise_cost(const EnsembleT<Scalar>& mu, const EnsembleT<Scalar>& nu, Scalar theta) {
  const Eigen::Index m = mu.size();
  MatrixX<Scalar> c(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      c(i, j) = std::pow((mu.points().row(i) - nu.points().row(j)).norm(), theta);
  return c;
}

template <class Scalar>
void check_pair(const EnsembleT<Scalar>& mu, const EnsembleT<Scalar>& nu) {
  if (mu.size() != nu.size())
    throw std::invalid_argument("transport: equal ensemble sizes required (resample at the caller)");
  if (mu.dim() != nu.dim()) throw std::invalid_argument("transport: dimension mismatch");
}

}  // namespace detail

/// Exact W_theta on the line for equal-size sorted samples: order statistics
/// match, ((1/M) sum |x_(i) - y_(i)|^theta)^(1/theta).
template <class Scalar>
Scalar w_theta_1d(const VectorX<Scalar>& xs_sorted, const VectorX<Scalar>& ys_sorted, Scalar theta) {
  if (xs_sorted.size() != ys_sorted.size())
    throw std::invalid_argument("w_theta_1d: equal sizes required (resample at the caller)");
  if (xs_sorted.size() == 0) throw std::invalid_argument("w_theta_1d: empty input");
  for (Eigen::Index i = 0; i + 1 < xs_sorted.size(); ++i)
    if (xs_sorted(i) > xs_sorted(i + 1) || ys_sorted(i) > ys_sorted(i + 1))
      throw std::invalid_argument("w_theta_1d: inputs must be sorted");
  const Scalar cost =
      (xs_sorted - ys_sorted).array().abs().pow(theta).mean();
  return std::pow(cost, Scalar(1) / theta);
}

/// Exact assignment solve; default size cap keeps the O(M^3) solver at desk
/// scale. Larger instances must opt into Sinkhorn explicitly.
inline constexpr Eigen::Index kExactAssignmentCap = 256;

template <class Scalar>
std::pair<Scalar, CouplingPlanT<Scalar>> w_theta_exact(const EnsembleT<Scalar>& mu,
                                                       const EnsembleT<Scalar>& nu, Scalar theta,
                                                       Eigen::Index cap = kExactAssignmentCap) {
  detail::check_pair(mu, nu);
  if (mu.size() > cap)
    throw std::invalid_argument(
        "w_theta_exact: ensemble size exceeds the exact-assignment cap; use w_theta_sinkhorn");
  const MatrixX<Scalar> c = detail::pairwise_cost(mu, nu, theta);
  CouplingPlanT<Scalar> plan;
  plan.permutation = detail::solve_assignment(c);
  plan.theta = theta;
  plan.method = CouplingMethod::exact_assignment;
  Scalar cost = 0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) cost += c(i, plan.permutation(i));
  plan.cost = cost / Scalar(mu.size());
  return {plan.distance(), plan};
}

struct SinkhornOptions {
  double epsilon = 1e-3;
  int max_iter = 20000;
  double tol = 2e-6;  // max column-marginal violation before rounding
};

/// Entropically regularized transport via log-domain Sinkhorn with epsilon
/// scaling. Reports the raw transported cost of the regularized plan, which
/// upper-bounds the exact optimum up to the marginal tolerance.
template <class Scalar>
std::pair<Scalar, CouplingPlanT<Scalar>> w_theta_sinkhorn_plan(const EnsembleT<Scalar>& mu,
                                                               const EnsembleT<Scalar>& nu,
                                                               Scalar theta,
                                                               const SinkhornOptions& opt = {}) {
  detail::check_pair(mu, nu);
  if (!(opt.epsilon > 0)) throw std::invalid_argument("sinkhorn: epsilon > 0 required");
  const Eigen::Index m = mu.size();
  const MatrixX<Scalar> c = detail::pairwise_cost(mu, nu, theta);
  const Scalar log_mass = -std::log(Scalar(m));

  VectorX<Scalar> f = VectorX<Scalar>::Zero(m), g = VectorX<Scalar>::Zero(m);
  auto lse_rows = [](const MatrixX<Scalar>& k) {  // logsumexp over columns, per row
    const VectorX<Scalar> mx = k.rowwise().maxCoeff();
    VectorX<Scalar> out =
        ((k.colwise() - mx).array().exp().rowwise().sum().log() + mx.array()).matrix();
    return out;
  };
  auto log_plan = [&](Scalar eps) {
    MatrixX<Scalar> lp = (((-c).colwise() + f).rowwise() + g.transpose()) / eps;
    return lp;
  };

  const Scalar eps_start = std::max<Scalar>(opt.epsilon, c.maxCoeff() * Scalar(0.5) + Scalar(1e-30));
  std::vector<Scalar> levels;
  for (Scalar e = eps_start; e > opt.epsilon; e *= Scalar(0.5)) levels.push_back(e);
  levels.push_back(opt.epsilon);

  Scalar violation = std::numeric_limits<Scalar>::infinity();
  for (Scalar eps : levels) {
    const bool final_level = (eps == opt.epsilon);
    const int iters = final_level ? opt.max_iter : 60;
    for (int it = 0; it < iters; ++it) {
      MatrixX<Scalar> k = (((-c).colwise() + f) / eps).transpose();  // (f_i - c_ij)/eps
      g = eps * (VectorX<Scalar>::Constant(m, log_mass) - lse_rows(k));
      k = ((-c).rowwise() + g.transpose()) / eps;  // (g_j - c_ij)/eps
      f = eps * (VectorX<Scalar>::Constant(m, log_mass) - lse_rows(k));
      // row marginals of the plan are exact after the f update; the column
      // violation measures convergence.
      violation = (log_plan(eps).array().exp().colwise().sum().transpose() - Scalar(1) / Scalar(m))
                      .cwiseAbs()
                      .maxCoeff();
      if (violation <= opt.tol) break;
    }
    if (final_level && violation > opt.tol) throw SinkhornError(double(violation));
  }

  CouplingPlanT<Scalar> plan;
  plan.matrix = log_plan(Scalar(opt.epsilon)).array().exp().matrix();
  // round to exact feasibility, so the reported cost is that of a true
  // coupling and can never undercut the assignment optimum
  const Scalar mass = Scalar(1) / Scalar(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Scalar r = plan.matrix.row(i).sum();
    if (r > mass) plan.matrix.row(i) *= mass / r;
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    const Scalar cj = plan.matrix.col(j).sum();
    if (cj > mass) plan.matrix.col(j) *= mass / cj;
  }
  VectorX<Scalar> row_def = VectorX<Scalar>::Constant(m, mass) - plan.matrix.rowwise().sum();
  VectorX<Scalar> col_def = VectorX<Scalar>::Constant(m, mass) - plan.matrix.colwise().sum().transpose();
  const Scalar deficit = row_def.sum();
  if (deficit > Scalar(0)) plan.matrix += (row_def * col_def.transpose()) / deficit;

  plan.cost = (plan.matrix.array() * c.array()).sum();
  plan.theta = theta;
  plan.method = CouplingMethod::sinkhorn;
  return {plan.distance(), plan};
}

template <class Scalar>
Scalar w_theta_sinkhorn(const EnsembleT<Scalar>& mu, const EnsembleT<Scalar>& nu, Scalar theta,
                        Scalar epsilon, int max_iter = 20000, Scalar tol = Scalar(2e-6)) {
  SinkhornOptions opt;
  opt.epsilon = double(epsilon);
  opt.max_iter = max_iter;
  opt.tol = double(tol);
  return w_theta_sinkhorn_plan(mu, nu, theta, opt).first;
}

/// Permutation realizing the empirical optimal coupling, used to pair initial
/// particles so that the average pairwise cost attains W_theta^theta.
template <class Scalar>
Eigen::VectorXi optimal_initial_pairing(const EnsembleT<Scalar>& mu0, const EnsembleT<Scalar>& nu0,
                                        Scalar theta, Eigen::Index cap = kExactAssignmentCap) {
  detail::check_pair(mu0, nu0);
  if (mu0.dim() == 1) {
    // Monotone rearrangement; stable sort breaks ties by index.
    const Eigen::Index m = mu0.size();
    std::vector<int> rx(m), ry(m);
    std::iota(rx.begin(), rx.end(), 0);
    std::iota(ry.begin(), ry.end(), 0);
    std::stable_sort(rx.begin(), rx.end(),
                     [&](int a, int b) { return mu0.points()(a, 0) < mu0.points()(b, 0); });
    std::stable_sort(ry.begin(), ry.end(),
                     [&](int a, int b) { return nu0.points()(a, 0) < nu0.points()(b, 0); });
    Eigen::VectorXi perm(m);
    for (Eigen::Index r = 0; r < m; ++r) perm(rx[r]) = ry[r];
    return perm;
  }
  return w_theta_exact(mu0, nu0, theta, cap).second.permutation;
}

/// Method dispatch: exact on the line at any size, exact assignment under the
/// cap, Sinkhorn beyond it.
template <class Scalar>
Scalar w_theta_auto(const EnsembleT<Scalar>& mu, const EnsembleT<Scalar>& nu, Scalar theta,
                    Eigen::Index cap = kExactAssignmentCap, const SinkhornOptions& opt = {}) {
  detail::check_pair(mu, nu);
  if (mu.dim() == 1) {
    VectorX<Scalar> xs = mu.points().col(0), ys = nu.points().col(0);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    return w_theta_1d(xs, ys, theta);
  }
  if (mu.size() <= cap) return w_theta_exact(mu, nu, theta, cap).first;
  return w_theta_sinkhorn_plan(mu, nu, theta, opt).first;
}

}  // namespace mvsde
