#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mvsde/coefficients.hpp"
#include "mvsde/common.hpp"
#include "mvsde/ensemble.hpp"
#include "mvsde/grid.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/simulate.hpp"
#include "mvsde/transport.hpp"

namespace mvsde {

/// gamma = (72/25) K + 2 d / (25 delta) + 12 lambda / 25.
template <class Scalar>
Scalar gamma_constant(Scalar k_const, int d, Scalar delta, Scalar lambda) {
  if (!(delta > 0)) throw std::invalid_argument("gamma_constant: delta > 0 required");
  if (!(k_const >= 1) || d < 0 || !(lambda >= 0))
    throw std::invalid_argument("gamma_constant: need K >= 1, d >= 0, lambda >= 0");
  return Scalar(72) / 25 * k_const + Scalar(2 * d) / (25 * delta) + Scalar(12) / 25 * lambda;
}

/// zeta_t = (12 / (25 gamma)) (1 - exp((25 gamma / 16)(t - t0))): strictly
/// positive and decreasing before t0, exactly zero at t0.
template <class Scalar>
Scalar zeta_value(Scalar gamma, Scalar t0, Scalar t) {
  return Scalar(12) / (25 * gamma) * (Scalar(1) - std::exp(Scalar(25) * gamma / 16 * (t - t0)));
}

/// zeta at every grid node up to and including t0 (t0 must be a node).
template <class Scalar>
VectorX<Scalar> zeta_schedule(Scalar gamma, Scalar t0, const TimeGrid& grid) {
  if (!(gamma > 0)) throw std::invalid_argument("zeta_schedule: gamma > 0 required");
  const int k0 = grid.node_index(double(t0));
  VectorX<Scalar> out(k0 + 1);
  for (int k = 0; k <= k0; ++k) out(k) = zeta_value(gamma, t0, Scalar(grid.node(k)));
  out(k0) = Scalar(0);
  return out;
}

/// Coupled pair (X, Y) sharing Brownian increments: X solves the frozen
/// mu-flow SDE, Y the modified SDE with the zeta-singular attraction, plus
/// the per-path Girsanov log-weight bookkeeping split into its stochastic
/// and quadratic parts (log R = stochastic - quadratic).
template <class Scalar = double>
struct CouplingRunT {
  TimeGrid grid{0.0, 1.0, 1};
  Scalar t0{};
  Scalar gamma{};
  Scalar merge_tolerance{};
  VectorX<Scalar> zeta;

  MatrixX<Scalar> x_terminal, y_terminal;  // M x d
  VectorX<Scalar> log_weight_stochastic;
  VectorX<Scalar> log_weight_quadratic;
  VectorX<Scalar> penultimate_gap;  // |X - Y| at the last node before t0
  std::vector<char> merged;

  std::vector<MatrixX<Scalar>> x_snapshots, y_snapshots;  // optional full paths

  Eigen::Index particles() const { return x_terminal.rows(); }
  VectorX<Scalar> log_weights() const { return log_weight_stochastic - log_weight_quadratic; }
  double merge_rate() const {
    return double(std::count(merged.begin(), merged.end(), char(1))) / double(merged.size());
  }
  Scalar median_penultimate_gap() const {
    VectorX<Scalar> g = penultimate_gap;
    std::nth_element(g.begin(), g.begin() + g.size() / 2, g.end());
    return g(g.size() / 2);
  }
};

using CouplingRun = CouplingRunT<double>;

/// Per-path Girsanov densities R at the horizon.
template <class Scalar = double>
struct WeightVectorT {
  VectorX<Scalar> r;
  std::vector<char> merged;
  Estimate<Scalar> mean_r() const { return mean_with_se<Scalar>(r); }
};

using WeightVector = WeightVectorT<double>;

template <class Scalar>
WeightVectorT<Scalar> weight_vector(const CouplingRunT<Scalar>& run) {
  WeightVectorT<Scalar> w;
  w.r = run.log_weights().array().exp().matrix();
  w.merged = run.merged;
  if (!w.r.allFinite() || (w.r.array() <= Scalar(0)).any())
    throw std::runtime_error("weight_vector: non-positive or non-finite density");
  return w;
}

struct CouplingOptions {
  double merge_tol_factor = 10.0;  // merge tolerance = factor * sqrt(dt) * ||sigma||
  bool keep_paths = false;
  int threads = 1;
};

/// Coupling by change of measure for distribution-free diffusion: X and Y
/// are advanced with the same increments, Y's drift carries the attraction
/// zeta_t^{-1} sigma(Y) sigma(X)^{-1} (X - Y), and the final step to t0
/// replaces the attraction by an exact merge Y := X once the gap at the
/// penultimate node is below the merge tolerance (the discrete counterpart
/// of the schedule's divergent attraction integral).
template <class Scalar>
CouplingRunT<Scalar> coupled_simulate(const CoefficientSpecT<Scalar>& spec,
                                      const EnsembleT<Scalar>& mu0, const EnsembleT<Scalar>& nu0,
                                      Scalar t0, const TimeGrid& grid, Scalar gamma,
                                      const MeasureFlowT<Scalar>& mu_flow,
                                      const MeasureFlowT<Scalar>& nu_flow, std::uint64_t seed,
                                      const CouplingOptions& opts = {}) {
  if (!spec.diffusion_distribution_free)
    throw std::invalid_argument("coupled_simulate: diffusion must be distribution-free");
  if (grid.node_index(double(t0)) != grid.n_steps())
    throw std::invalid_argument("coupled_simulate: t0 must be the grid end");
  const int d = spec.dim;
  const Eigen::Index m = mu0.size();
  if (nu0.size() != m) throw std::invalid_argument("coupled_simulate: equal ensemble sizes required");
  const int n = grid.n_steps();
  const Scalar dt = Scalar(grid.dt());
  const Scalar sdt = std::sqrt(dt);

  CouplingRunT<Scalar> run;
  run.grid = grid;
  run.t0 = t0;
  run.gamma = gamma;
  run.zeta = zeta_schedule(gamma, t0, grid);
  run.log_weight_stochastic = VectorX<Scalar>::Zero(m);
  run.log_weight_quadratic = VectorX<Scalar>::Zero(m);
  run.penultimate_gap = VectorX<Scalar>::Zero(m);
  run.merged.assign(m, char(0));
  if (opts.keep_paths) {
    run.x_snapshots.assign(n + 1, MatrixX<Scalar>(m, d));
    run.y_snapshots.assign(n + 1, MatrixX<Scalar>(m, d));
  }

  // optimal initial pairing attains the empirical W_2 as average pair cost
  const Eigen::VectorXi perm = optimal_initial_pairing(mu0, nu0, Scalar(2));
  MatrixX<Scalar> xs = mu0.points().transpose();  // d x M
  MatrixX<Scalar> ys(d, m);
  for (Eigen::Index i = 0; i < m; ++i) ys.col(i) = nu0.points().row(perm(i)).transpose();

  // constant-diffusion fast path
  MatrixX<Scalar> sig_const, sig_const_inv;
  if (spec.diffusion_constant) {
    sig_const = spec.diffusion_at(Scalar(0), VectorX<Scalar>::Zero(d), nullptr);
    sig_const_inv = sig_const.partialPivLu().solve(MatrixX<Scalar>::Identity(d, d));
  }
  const Scalar sigma_norm_hint =
      spec.diffusion_constant ? sig_const.operatorNorm() : std::sqrt(spec.K);
  run.merge_tolerance = Scalar(opts.merge_tol_factor) * sdt * sigma_norm_hint;

  const NormalField nf(seed);
  std::atomic<std::int64_t> first_bad{-1};

  for (int k = 0; k < n; ++k) {
    const Scalar t = Scalar(grid.node(k));
    const Scalar zk = run.zeta(k);
    const bool last = (k == n - 1);
    if (!last && !(zk > Scalar(1e-280)))
      throw std::runtime_error("coupled_simulate: zeta underflow before the final node");
    const EnsembleT<Scalar>& mu_k = mu_flow.at(k);
    const EnsembleT<Scalar>& nu_k = nu_flow.at(k);
    if (opts.keep_paths) {
      run.x_snapshots[k] = xs.transpose();
      run.y_snapshots[k] = ys.transpose();
    }
    parallel_for(m, opts.threads, [&, k, t, zk, last](std::int64_t i0, std::int64_t i1) {
      VectorX<Scalar> bx(d), by(d), dw(d), gap(d), u(d);
      MatrixX<Scalar> sx(d, d), sy(d, d);
      for (std::int64_t i = i0; i < i1; ++i) {
        auto x = xs.col(i);
        auto y = ys.col(i);
        for (int j = 0; j < d; j += 2) {
          const auto pr = nf.pair(std::uint32_t(i), std::uint32_t(k), std::uint32_t(j >> 1));
          dw(j) = sdt * Scalar(pr[0]);
          if (j + 1 < d) dw(j + 1) = sdt * Scalar(pr[1]);
        }
        spec.drift(t, x, &mu_k, bx);
        gap = x - y;
        const Scalar gap_norm = gap.norm();
        if (last) run.penultimate_gap(i) = gap_norm;

        if (spec.diffusion_constant) {
          sx = sig_const;
        } else {
          spec.diffusion(t, x, nullptr, sx);
        }

        if (last && gap_norm <= run.merge_tolerance) {
          x += bx * dt + sx * dw;
          y = x;  // exact merge at t0
          run.merged[i] = char(1);
          continue;
        }

        spec.drift(t, y, &nu_k, by);
        if (spec.diffusion_constant) {
          sy = sig_const;
          u = sig_const_inv * gap;
        } else {
          spec.diffusion(t, y, nullptr, sy);
          if (d == 1) {
            if (std::abs(sx(0, 0)) < Scalar(1e-300))
              throw std::runtime_error("coupled_simulate: sigma numerically singular");
            u = gap / sx(0, 0);
          } else {
            Eigen::PartialPivLU<MatrixX<Scalar>> lu(sx);
            if (std::abs(lu.determinant()) < Scalar(1e-300))
              throw std::runtime_error("coupled_simulate: sigma numerically singular");
            u = lu.solve(gap);
          }
        }
        // u = sigma(X)^{-1}(X - Y); the density integrand uses Y - X = -u
        run.log_weight_stochastic(i) += -(u.dot(dw)) / zk;
        run.log_weight_quadratic(i) += u.squaredNorm() * dt / (2 * zk * zk);

        x += bx * dt + sx * dw;
        y += (by * dt + (sy * u) * (dt / zk)) + sy * dw;
        if (!x.allFinite() || !y.allFinite()) {
          std::int64_t expect = -1;
          first_bad.compare_exchange_strong(expect, i * (n + 1) + (k + 1));
        }
      }
    });
    detail::throw_if_bad<Scalar>(first_bad, n);
  }
  if (opts.keep_paths) {
    run.x_snapshots[n] = xs.transpose();
    run.y_snapshots[n] = ys.transpose();
  }
  run.x_terminal = xs.transpose();
  run.y_terminal = ys.transpose();
  return run;
}

/// Monte Carlo E[R log R] with its standard error, and the (1/t0) W_2^2
/// comparator for the entropy-cost scaling.
template <class Scalar>
struct EntropyReport {
  Estimate<Scalar> entropy;
  Scalar w2_sq_over_t0{};
};

template <class Scalar>
EntropyReport<Scalar> entropy_estimate(const CouplingRunT<Scalar>& run,
                                       Scalar w2_initial = Scalar(-1)) {
  const VectorX<Scalar> lw = run.log_weights();
  VectorX<Scalar> rlogr = (lw.array().exp() * lw.array()).matrix();
  if (!rlogr.allFinite()) throw std::runtime_error("entropy_estimate: non-finite weight");
  EntropyReport<Scalar> rep;
  rep.entropy = mean_with_se<Scalar>(rlogr);
  rep.w2_sq_over_t0 = w2_initial >= 0 ? w2_initial * w2_initial / run.t0 : Scalar(-1);
  return rep;
}

/// f(x) = max(exp(<a, x> - shift), 1). With shift deep in the favorable tail
/// the floor keeps f >= 1 while staying inactive on virtually all mass, so
/// closed-form exponential comparisons remain valid.
template <class Scalar>
std::function<Scalar(const VectorX<Scalar>&)> exp_floor_function(const VectorX<Scalar>& a,
                                                                 Scalar shift) {
  return [a, shift](const VectorX<Scalar>& x) {
    return std::max(std::exp(a.dot(x) - shift), Scalar(1));
  };
}

struct HarnackOptions {
  int n_steps = 400;
  Eigen::Index flow_particles = 2048;
  double c_config = 0.5;    // constant for the (C/(t ^ 1)) W2^2 route
  double gamma = -1.0;      // < 0: use gamma_constant(K, d, delta, lambda)
  double delta = -1.0;      // < 0: default 1/K
  double lambda = 0.0;
  double merge_tol_factor = 10.0;
  int threads = 1;
};

template <class Scalar>
struct HarnackReport {
  Scalar lhs{}, lhs_se{};            // E log f at the horizon, started from nu0
  Scalar log_pf{}, log_pf_se{};      // log E f at the horizon, started from mu0
  Scalar entropy{}, entropy_se{};    // E[R log R]
  Scalar rhs_coupling{};             // log_pf + entropy
  Scalar rhs_c{};                    // log_pf + (C/(t0 ^ 1)) W2^2
  Scalar slack{}, slack_se{};        // lhs - rhs_coupling
  Scalar jensen_gap{};               // lhs - log_pf
  Scalar minimal_c{};                // smallest C making the inequality hold
  Scalar w2{};
  Scalar mean_r{}, mean_r_se{};
  Scalar merge_rate{};
  Scalar median_terminal_gap{};      // gap at the last node before t0
  bool holds_coupling = false;       // slack <= 3 SE
  bool holds_c = false;              // lhs <= rhs_c + 3 SE
  VectorX<Scalar> path_weights;      // per-path R, exported on request
};

namespace detail {

template <class Scalar>
std::pair<MeasureFlowT<Scalar>, MeasureFlowT<Scalar>> harnack_flows(
    const CoefficientSpecT<Scalar>& spec, const EnsembleT<Scalar>& mu0,
    const EnsembleT<Scalar>& nu0, const TimeGrid& grid, std::uint64_t seed,
    const HarnackOptions& opt) {
  auto shrink = [&](const EnsembleT<Scalar>& e) {
    const Eigen::Index f = std::min<Eigen::Index>(opt.flow_particles, e.size());
    return EnsembleT<Scalar>(e.points().topRows(f));
  };
  RunOptions ro;
  ro.keep_paths = false;
  ro.keep_noise = false;
  ro.threads = opt.threads;
  auto mu_res = particle_system(spec, shrink(mu0), grid, derive_seed(seed, 101), ro);
  auto nu_res = particle_system(spec, shrink(nu0), grid, derive_seed(seed, 102), ro);
  return {std::move(*mu_res.flow), std::move(*nu_res.flow)};
}

template <class Scalar>
VectorX<Scalar> apply_function(const std::function<Scalar(const VectorX<Scalar>&)>& f,
                               const MatrixX<Scalar>& points, Scalar min_value) {
  VectorX<Scalar> out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out(i) = f(points.row(i).transpose());
    if (out(i) < min_value)
      throw std::invalid_argument("harnack: test function below its required floor on a sample");
  }
  return out;
}

}  // namespace detail

/// Monte Carlo verification of the log-Harnack inequality
/// (P_t log f)(nu0) <= log (P_t f)(mu0) + (C / (t ^ 1)) W_2(mu0, nu0)^2
/// through the coupling route (entropy bound) and the constant-C route.
template <class Scalar>
HarnackReport<Scalar> log_harnack_check(const CoefficientSpecT<Scalar>& spec,
                                        const std::function<Scalar(const VectorX<Scalar>&)>& f,
                                        const EnsembleT<Scalar>& mu0, const EnsembleT<Scalar>& nu0,
                                        Scalar t0, std::uint64_t seed,
                                        const HarnackOptions& opt = {}) {
  const TimeGrid grid(0.0, double(t0), opt.n_steps);
  auto [mu_flow, nu_flow] = detail::harnack_flows(spec, mu0, nu0, grid, seed, opt);

  const Scalar delta = opt.delta > 0 ? Scalar(opt.delta) : Scalar(1) / spec.K;
  const Scalar gamma = opt.gamma > 0
                           ? Scalar(opt.gamma)
                           : gamma_constant(spec.K, spec.dim, delta, Scalar(opt.lambda));

  CouplingOptions copt;
  copt.merge_tol_factor = opt.merge_tol_factor;
  copt.threads = opt.threads;
  const auto run = coupled_simulate(spec, mu0, nu0, t0, grid, gamma, mu_flow, nu_flow,
                                    derive_seed(seed, 103), copt);

  RunOptions ro;
  ro.keep_paths = false;
  ro.keep_noise = false;
  ro.threads = opt.threads;
  const auto nu_run = euler_frozen(spec, &nu_flow, nu0, grid, derive_seed(seed, 104), ro);

  HarnackReport<Scalar> rep;
  const auto f_nu = detail::apply_function(f, nu_run.terminal(), Scalar(1));
  const auto lhs = mean_with_se<Scalar>(VectorX<Scalar>(f_nu.array().log().matrix()));
  rep.lhs = lhs.value;
  rep.lhs_se = lhs.se;

  const auto f_mu = detail::apply_function(f, run.x_terminal, Scalar(1));
  const auto pf = mean_with_se<Scalar>(f_mu);
  rep.log_pf = std::log(pf.value);
  rep.log_pf_se = pf.se / pf.value;

  rep.w2 = w_theta_auto(mu0, nu0, Scalar(2));
  const auto ent = entropy_estimate(run, rep.w2);
  rep.entropy = ent.entropy.value;
  rep.entropy_se = ent.entropy.se;

  const auto wv = weight_vector(run);
  const auto mr = wv.mean_r();
  rep.mean_r = mr.value;
  rep.mean_r_se = mr.se;
  rep.path_weights = wv.r;
  rep.merge_rate = Scalar(run.merge_rate());
  rep.median_terminal_gap = run.median_penultimate_gap();

  rep.rhs_coupling = rep.log_pf + rep.entropy;
  const Scalar t_eff = std::min(t0, Scalar(1));
  rep.rhs_c = rep.log_pf + Scalar(opt.c_config) / t_eff * rep.w2 * rep.w2;
  rep.jensen_gap = rep.lhs - rep.log_pf;
  rep.slack = rep.lhs - rep.rhs_coupling;
  rep.slack_se = std::sqrt(rep.lhs_se * rep.lhs_se + rep.log_pf_se * rep.log_pf_se +
                           rep.entropy_se * rep.entropy_se);
  rep.minimal_c = rep.w2 > Scalar(1e-14)
                      ? std::max(Scalar(0), rep.jensen_gap * t_eff / (rep.w2 * rep.w2))
                      : Scalar(0);
  rep.holds_coupling = rep.slack <= 3 * rep.slack_se;
  rep.holds_c =
      rep.lhs - rep.rhs_c <= 3 * std::sqrt(rep.lhs_se * rep.lhs_se + rep.log_pf_se * rep.log_pf_se);
  return rep;
}

template <class Scalar>
struct PowerHarnackReport {
  Scalar p{};
  Scalar lhs{}, lhs_se{};        // (E f)^p at nu0
  Scalar rhs_base{}, rhs_base_se{};  // E f^p at mu0
  Scalar rhs{};                  // rhs_base * exp(c/(t ^ 1) W2^2)
  Scalar slack{}, slack_se{};
  Scalar minimal_c{};
  Scalar w2{};
  bool holds = false;
};

/// Monte Carlo check of (P_t f)^p(nu0) <= (P_t f^p)(mu0) exp{c/(t^1) W2^2}.
template <class Scalar>
PowerHarnackReport<Scalar> power_harnack_check(const CoefficientSpecT<Scalar>& spec,
                                               const std::function<Scalar(const VectorX<Scalar>&)>& f,
                                               Scalar p, const EnsembleT<Scalar>& mu0,
                                               const EnsembleT<Scalar>& nu0, Scalar t0,
                                               std::uint64_t seed, const HarnackOptions& opt = {}) {
  if (!(p > 1)) throw std::invalid_argument("power_harnack_check: p > 1 required");
  const TimeGrid grid(0.0, double(t0), opt.n_steps);
  auto [mu_flow, nu_flow] = detail::harnack_flows(spec, mu0, nu0, grid, seed, opt);

  RunOptions ro;
  ro.keep_paths = false;
  ro.keep_noise = false;
  ro.threads = opt.threads;
  const auto mu_run = euler_frozen(spec, &mu_flow, mu0, grid, derive_seed(seed, 105), ro);
  const auto nu_run = euler_frozen(spec, &nu_flow, nu0, grid, derive_seed(seed, 104), ro);

  PowerHarnackReport<Scalar> rep;
  rep.p = p;
  const auto f_nu = detail::apply_function(f, nu_run.terminal(), Scalar(0));
  const auto f_mu = detail::apply_function(f, mu_run.terminal(), Scalar(0));
  const auto m_nu = mean_with_se<Scalar>(f_nu);
  const auto m_mu_p = mean_with_se<Scalar>(VectorX<Scalar>(f_mu.array().pow(p).matrix()));

  rep.lhs = std::pow(m_nu.value, p);
  rep.lhs_se = p * std::pow(m_nu.value, p - 1) * m_nu.se;
  rep.rhs_base = m_mu_p.value;
  rep.rhs_base_se = m_mu_p.se;
  rep.w2 = w_theta_auto(mu0, nu0, Scalar(2));
  const Scalar t_eff = std::min(t0, Scalar(1));
  const Scalar factor = std::exp(Scalar(opt.c_config) / t_eff * rep.w2 * rep.w2);
  rep.rhs = rep.rhs_base * factor;
  rep.slack = rep.lhs - rep.rhs;
  rep.slack_se = std::sqrt(rep.lhs_se * rep.lhs_se + factor * factor * rep.rhs_base_se * rep.rhs_base_se);
  rep.minimal_c =
      rep.w2 > Scalar(1e-14)
          ? std::max(Scalar(0),
                     (p * std::log(m_nu.value) - std::log(m_mu_p.value)) * t_eff / (rep.w2 * rep.w2))
          : Scalar(0);
  rep.holds = rep.slack <= 3 * rep.slack_se;
  return rep;
}

}  // namespace mvsde
