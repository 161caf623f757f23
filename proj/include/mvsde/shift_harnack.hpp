#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mvsde/coefficients.hpp"
#include "mvsde/common.hpp"
#include "mvsde/harnack.hpp"
#include "mvsde/simulate.hpp"

namespace mvsde {

/// Adaptive Simpson quadrature, refinement-stable to the given relative
/// tolerance.
template <class Scalar, class Fn>
Scalar adaptive_simpson(Fn&& fn, Scalar a, Scalar b, Scalar rel_tol = Scalar(1e-8)) {
  struct Rec {
    static Scalar simpson(Fn& f, Scalar a, Scalar m, Scalar b, Scalar fa, Scalar fm, Scalar fb) {
      return (b - a) / 6 * (fa + 4 * fm + fb);
    }
    static Scalar go(Fn& f, Scalar a, Scalar m, Scalar b, Scalar fa, Scalar fm, Scalar fb,
                     Scalar whole, Scalar tol, int depth) {
      const Scalar lm = (a + m) / 2, rm = (m + b) / 2;
      const Scalar flm = f(lm), frm = f(rm);
      const Scalar left = simpson(f, a, lm, m, fa, flm, fm);
      const Scalar right = simpson(f, m, rm, b, fm, frm, fb);
      if (depth > 40 || std::abs(left + right - whole) <= 15 * tol * (std::abs(left + right) + Scalar(1e-300)))
        return left + right + (left + right - whole) / 15;
      return go(f, a, lm, m, fa, flm, fm, left, tol / 2, depth + 1) +
             go(f, m, rm, b, fm, frm, fb, right, tol / 2, depth + 1);
    }
  };
  const Scalar m = (a + b) / 2;
  const Scalar fa = fn(a), fm = fn(m), fb = fn(b);
  return Rec::go(fn, a, m, b, fa, fm, fb, Rec::simpson(fn, a, m, b, fa, fm, fb), rel_tol, 0);
}

/// int_0^t0 ||sigma_s^{-1}||^2 { |v|/t0 + phi(s |v|/t0) }^2 ds, the cost term
/// of both shift-Harnack displays.
template <class Scalar>
Scalar dini_bound_integral(const DiniModulusT<Scalar>& phi,
                           const std::function<Scalar(Scalar)>& sigma_inv_norm, Scalar v_norm,
                           Scalar t0) {
  auto integrand = [&](Scalar s) {
    const Scalar n = sigma_inv_norm(s);
    const Scalar base = v_norm / t0 + phi(s * v_norm / t0);
    return n * n * base * base;
  };
  return adaptive_simpson<Scalar>(integrand, Scalar(0), t0);
}

/// Deterministic shift coupling: Y_t = X_t + t v / t0 exactly, with the
/// Girsanov density R = exp[-int <eta, dW> - 1/2 int |eta|^2 dt] where
/// eta_t = sigma_t^{-1} { v/t0 + b_t(X_t, mu_t) - b_t(X_t + t v/t0, mu_t) }.
template <class Scalar = double>
struct ShiftCouplingRunT {
  TimeGrid grid{0.0, 1.0, 1};
  Scalar t0{};
  VectorX<Scalar> v;
  PathBundleT<Scalar> x;             // mu0-started paths
  VectorX<Scalar> log_weight;        // log R per path
  VectorX<Scalar> eta_max_per_node;  // max_i |eta_t(i)| at each step node

  MatrixX<Scalar> y_terminal() const {
    return x.terminal().rowwise() + v.transpose();
  }
  PathBundleT<Scalar> y_bundle() const {
    PathBundleT<Scalar> y = x;
    for (std::size_t k = 0; k < y.snapshots.size(); ++k) {
      const Scalar t = (y.snapshots.size() == std::size_t(grid.n_nodes()))
                           ? Scalar(grid.node(int(k)))
                           : (k == 0 ? Scalar(grid.t_start()) : Scalar(grid.t_end()));
      y.snapshots[k].rowwise() += (t / t0 * v).transpose();
    }
    return y;
  }
  WeightVectorT<Scalar> weights() const {
    WeightVectorT<Scalar> w;
    w.r = log_weight.array().exp().matrix();
    w.merged.assign(std::size_t(w.r.size()), char(0));
    if (!w.r.allFinite()) throw std::runtime_error("shift coupling: non-finite density");
    return w;
  }
};

using ShiftCouplingRun = ShiftCouplingRunT<double>;

template <class Scalar>
ShiftCouplingRunT<Scalar> shift_coupled_simulate(const CoefficientSpecT<Scalar>& spec,
                                                 const EnsembleT<Scalar>& mu0,
                                                 const VectorX<Scalar>& v, Scalar t0,
                                                 const TimeGrid& grid,
                                                 const MeasureFlowT<Scalar>& mu_flow,
                                                 std::uint64_t seed, const RunOptions& opts = {}) {
  if (!spec.diffusion_state_free)
    throw std::invalid_argument("shift_coupled_simulate: diffusion must be state-free");
  if (grid.node_index(double(t0)) != grid.n_steps())
    throw std::invalid_argument("shift_coupled_simulate: t0 must be the grid end");
  const int d = spec.dim;
  const int n = grid.n_steps();
  const Scalar dt = Scalar(grid.dt());

  RunOptions xopts = opts;
  xopts.keep_noise = true;  // the density needs the exact increments
  xopts.keep_paths = true;  // eta is evaluated along X at every node
  ShiftCouplingRunT<Scalar> run;
  run.grid = grid;
  run.t0 = t0;
  run.v = v;
  run.x = euler_frozen(spec, &mu_flow, mu0, grid, seed, xopts);
  const Eigen::Index m = run.x.particles();
  run.log_weight = VectorX<Scalar>::Zero(m);
  run.eta_max_per_node = VectorX<Scalar>::Zero(n);

  VectorX<Scalar> bx(d), bshift(d), eta(d), xk(d);
  const VectorX<Scalar> dummy = VectorX<Scalar>::Zero(d);
  for (int k = 0; k < n; ++k) {
    const Scalar t = Scalar(grid.node(k));
    const EnsembleT<Scalar>& mu_k = mu_flow.at(k);
    MatrixX<Scalar> sig(d, d);
    spec.diffusion(t, dummy, &mu_k, sig);
    Eigen::PartialPivLU<MatrixX<Scalar>> lu(sig);
    if (std::abs(lu.determinant()) < Scalar(1e-300))
      throw std::runtime_error("shift_coupled_simulate: sigma inversion failure");
    const VectorX<Scalar> shift = (t / t0) * v;
    const MatrixX<Scalar>& xs = run.x.snapshots[k];
    for (Eigen::Index i = 0; i < m; ++i) {
      xk = xs.row(i).transpose();
      spec.drift(t, xk, &mu_k, bx);
      spec.drift(t, VectorX<Scalar>(xk + shift), &mu_k, bshift);
      eta = lu.solve(VectorX<Scalar>(v / t0 + bx - bshift));
      const Scalar eta_norm = eta.norm();
      run.eta_max_per_node(k) = std::max(run.eta_max_per_node(k), eta_norm);
      run.log_weight(i) +=
          -eta.dot(run.x.increments[k].row(i).transpose()) - eta_norm * eta_norm * dt / 2;
    }
  }
  if (!opts.keep_noise) run.x.increments.clear();
  if (!opts.keep_paths) {
    run.x.snapshots = {run.x.snapshots.front(), run.x.snapshots.back()};
  }
  return run;
}

struct ShiftHarnackOptions {
  int n_steps = 256;
  Eigen::Index flow_particles = 2048;
  DiniModulus phi = DiniModulus::hoelder(0.0, 1.0);  // default: zero modulus
  int threads = 1;
};

template <class Scalar>
struct ShiftHarnackReport {
  Scalar lhs{}, lhs_se{};          // E log f(X_t0)
  Scalar log_pfv{}, log_pfv_se{};  // log E f(X_t0 + v)
  Scalar bound_integral{};         // int ||sigma^{-1}||^2 {|v|/t0 + phi(s|v|/t0)}^2 ds
  Scalar rhs{};                    // log_pfv + bound_integral / 2
  Scalar slack{}, slack_se{};
  Scalar entropy{}, entropy_se{};  // E[R log R], the proof's sharper cost
  Scalar entropy_bound{};          // bound_integral / 2
  Scalar mean_r{}, mean_r_se{};
  bool holds = false;
};

namespace detail {

template <class Scalar>
DiniModulusT<Scalar> convert_modulus(const DiniModulus& phi) {
  DiniModulusT<Scalar> out;
  out.family = phi.family == DiniModulus::Family::hoelder ? DiniModulusT<Scalar>::Family::hoelder
                                                          : DiniModulusT<Scalar>::Family::log_dini;
  out.c = Scalar(phi.c);
  out.beta = Scalar(phi.beta);
  out.eps = Scalar(phi.eps);
  return out;
}

template <class Scalar>
std::function<Scalar(Scalar)> sigma_inv_norm_from_flow(const CoefficientSpecT<Scalar>& spec,
                                                       const MeasureFlowT<Scalar>& flow) {
  return [&spec, &flow](Scalar s) {
    const int k = std::min(std::max(int(std::llround((s - flow.grid().t_start()) / flow.grid().dt())), 0),
                           flow.grid().n_steps());
    const VectorX<Scalar> dummy = VectorX<Scalar>::Zero(spec.dim);
    MatrixX<Scalar> sig(spec.dim, spec.dim);
    spec.diffusion(Scalar(flow.grid().node(k)), dummy, &flow.at(k), sig);
    return Scalar(sig.inverse().operatorNorm());
  };
}

}  // namespace detail

/// Theorem-style check of
/// (P_t log f)(mu0) <= log (P_t f(v+.))(mu0) + 1/2 int_0^t ||sigma^{-1}||^2
/// {|v|/t + phi(s|v|/t)}^2 ds, with both sides sampled from the same run.
template <class Scalar>
ShiftHarnackReport<Scalar> shift_log_harnack_check(const CoefficientSpecT<Scalar>& spec,
                                                   const std::function<Scalar(const VectorX<Scalar>&)>& f,
                                                   const EnsembleT<Scalar>& mu0,
                                                   const VectorX<Scalar>& v, Scalar t0,
                                                   std::uint64_t seed,
                                                   const ShiftHarnackOptions& opt = {}) {
  const TimeGrid grid(0.0, double(t0), opt.n_steps);
  RunOptions ro;
  ro.keep_paths = false;
  ro.keep_noise = false;
  ro.threads = opt.threads;
  const Eigen::Index fp = std::min<Eigen::Index>(opt.flow_particles, mu0.size());
  auto flow_res = particle_system(spec, EnsembleT<Scalar>(mu0.points().topRows(fp)), grid,
                                  derive_seed(seed, 201), ro);
  const MeasureFlowT<Scalar>& flow = *flow_res.flow;

  RunOptions copts;
  copts.keep_paths = true;  // consumed during weight accumulation
  copts.keep_noise = false;
  copts.threads = opt.threads;
  const auto run = shift_coupled_simulate(spec, mu0, v, t0, grid, flow, derive_seed(seed, 202), copts);

  ShiftHarnackReport<Scalar> rep;
  const auto f_x = detail::apply_function(f, run.x.terminal(), Scalar(1));
  const auto lhs = mean_with_se<Scalar>(VectorX<Scalar>(f_x.array().log().matrix()));
  rep.lhs = lhs.value;
  rep.lhs_se = lhs.se;

  const auto f_xv = detail::apply_function(f, MatrixX<Scalar>(run.y_terminal()), Scalar(1));
  const auto pfv = mean_with_se<Scalar>(f_xv);
  rep.log_pfv = std::log(pfv.value);
  rep.log_pfv_se = pfv.se / pfv.value;

  rep.bound_integral = dini_bound_integral(detail::convert_modulus<Scalar>(opt.phi),
                                           detail::sigma_inv_norm_from_flow(spec, flow), v.norm(), t0);
  rep.rhs = rep.log_pfv + rep.bound_integral / 2;
  rep.entropy_bound = rep.bound_integral / 2;

  const VectorX<Scalar> lw = run.log_weight;
  const auto ent = mean_with_se<Scalar>(VectorX<Scalar>((lw.array().exp() * lw.array()).matrix()));
  rep.entropy = ent.value;
  rep.entropy_se = ent.se;
  const auto mr = run.weights().mean_r();
  rep.mean_r = mr.value;
  rep.mean_r_se = mr.se;

  rep.slack = rep.lhs - rep.rhs;
  rep.slack_se = std::sqrt(rep.lhs_se * rep.lhs_se + rep.log_pfv_se * rep.log_pfv_se);
  rep.holds = rep.slack <= 3 * rep.slack_se;
  return rep;
}

template <class Scalar>
struct ShiftPowerReport {
  Scalar p{};
  Scalar lhs{}, lhs_se{};                    // (E f(X))^p
  Scalar rhs_base{}, rhs_base_se{};          // E f^p(X + v)
  Scalar bound_integral{};
  Scalar rhs_statement{};                    // exponent p I / (2 (p-1))
  Scalar rhs_proof{};                        // exponent p I / (2 (p-1)^2)
  Scalar slack_statement{}, slack_proof{};
  Scalar slack_se{};
  bool holds_statement = false, holds_proof = false;
};

/// Both power displays: the statement's exponent uses 2(p-1), the proof's
/// derivation gives 2(p-1)^2; both are reported.
template <class Scalar>
ShiftPowerReport<Scalar> shift_power_harnack_check(const CoefficientSpecT<Scalar>& spec,
                                                   const std::function<Scalar(const VectorX<Scalar>&)>& f,
                                                   Scalar p, const EnsembleT<Scalar>& mu0,
                                                   const VectorX<Scalar>& v, Scalar t0,
                                                   std::uint64_t seed,
                                                   const ShiftHarnackOptions& opt = {}) {
  if (!(p > 1)) throw std::invalid_argument("shift_power_harnack_check: p > 1 required");
  const TimeGrid grid(0.0, double(t0), opt.n_steps);
  RunOptions ro;
  ro.keep_paths = false;
  ro.keep_noise = false;
  ro.threads = opt.threads;
  const Eigen::Index fp = std::min<Eigen::Index>(opt.flow_particles, mu0.size());
  auto flow_res = particle_system(spec, EnsembleT<Scalar>(mu0.points().topRows(fp)), grid,
                                  derive_seed(seed, 201), ro);
  const auto x_run = euler_frozen(spec, &*flow_res.flow, mu0, grid, derive_seed(seed, 202), ro);

  ShiftPowerReport<Scalar> rep;
  rep.p = p;
  const auto f_x = detail::apply_function(f, x_run.terminal(), Scalar(0));
  const auto f_xv = detail::apply_function(
      f, MatrixX<Scalar>(x_run.terminal().rowwise() + v.transpose()), Scalar(0));
  const auto m_x = mean_with_se<Scalar>(f_x);
  const auto m_xv_p = mean_with_se<Scalar>(VectorX<Scalar>(f_xv.array().pow(p).matrix()));
  rep.lhs = std::pow(m_x.value, p);
  rep.lhs_se = p * std::pow(m_x.value, p - 1) * m_x.se;
  rep.rhs_base = m_xv_p.value;
  rep.rhs_base_se = m_xv_p.se;

  rep.bound_integral =
      dini_bound_integral(detail::convert_modulus<Scalar>(opt.phi),
                          detail::sigma_inv_norm_from_flow(spec, *flow_res.flow), v.norm(), t0);
  const Scalar e_statement = std::exp(p * rep.bound_integral / (2 * (p - 1)));
  const Scalar e_proof = std::exp(p * rep.bound_integral / (2 * (p - 1) * (p - 1)));
  rep.rhs_statement = rep.rhs_base * e_statement;
  rep.rhs_proof = rep.rhs_base * e_proof;
  rep.slack_statement = rep.lhs - rep.rhs_statement;
  rep.slack_proof = rep.lhs - rep.rhs_proof;
  rep.slack_se = std::sqrt(rep.lhs_se * rep.lhs_se +
                           std::max(e_statement, e_proof) * std::max(e_statement, e_proof) *
                               rep.rhs_base_se * rep.rhs_base_se);
  rep.holds_statement = rep.slack_statement <= 3 * rep.slack_se;
  rep.holds_proof = rep.slack_proof <= 3 * rep.slack_se;
  return rep;
}

}  // namespace mvsde
