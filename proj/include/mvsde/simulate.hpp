#pragma once

#include <atomic>
#include <type_traits>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/coefficients.hpp"
#include "mvsde/common.hpp"
#include "mvsde/ensemble.hpp"
#include "mvsde/grid.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/transport.hpp"

namespace mvsde {

struct RunOptions {
  bool keep_paths = true;   // retain every node snapshot (else initial + terminal only)
  bool keep_noise = true;   // retain Brownian increments
  bool keep_flow = true;    // particle_system: build the realized MeasureFlow
  int threads = 1;
};

namespace detail {

template <class Scalar>
void throw_if_bad(const std::atomic<std::int64_t>& first_bad, int n_steps) {
  const std::int64_t enc = first_bad.load();
  if (enc >= 0)
    throw std::runtime_error("simulate: non-finite state at particle " +
                             std::to_string(enc / (n_steps + 1)) + ", step " +
                             std::to_string(enc % (n_steps + 1)));
}

}  // namespace detail

/// Euler-Maruyama for the reduced SDE against a frozen measure flow:
/// X_{k+1} = X_k + b(t_k, X_k, flow_k) dt + sigma(t_k, X_k, flow_k) dW_k.
/// Pass flow = nullptr for measure-free coefficients. Each particle draws an
/// independent seed-derived noise stream, so results do not depend on thread
/// count; `noise_override` substitutes explicit increments (refinement
/// studies reuse a fine path by summing pairs).
template <class Scalar>
PathBundleT<Scalar> euler_frozen(const CoefficientSpecT<Scalar>& spec,
                                 std::type_identity_t<const MeasureFlowT<Scalar>*> flow,
                                 const EnsembleT<Scalar>& x0, const TimeGrid& grid,
                                 std::uint64_t seed, const RunOptions& opts = {},
                                 std::type_identity_t<const std::vector<MatrixX<Scalar>>*>
                                     noise_override = nullptr) {
  const int d = spec.dim;
  const Eigen::Index m = x0.size();
  if (x0.dim() != d) throw std::invalid_argument("euler_frozen: dimension mismatch");
  if (flow && !(flow->grid() == grid))
    throw std::invalid_argument("euler_frozen: flow grid mismatch");
  if (flow && flow->dim() != d) throw std::invalid_argument("euler_frozen: flow dimension mismatch");
  const int n = grid.n_steps();
  if (noise_override && Eigen::Index(noise_override->size()) != n)
    throw std::invalid_argument("euler_frozen: noise override size mismatch");
  const Scalar dt = Scalar(grid.dt());
  const Scalar sdt = std::sqrt(dt);

  PathBundleT<Scalar> out;
  out.grid = grid;
  out.seed = seed;
  if (opts.keep_noise) out.increments.assign(n, MatrixX<Scalar>(m, d));
  if (opts.keep_paths) {
    out.snapshots.assign(n + 1, MatrixX<Scalar>(m, d));
    out.snapshots[0] = x0.points();
  } else {
    out.snapshots.assign(2, MatrixX<Scalar>(m, d));
    out.snapshots[0] = x0.points();
  }

  MatrixX<Scalar> state = x0.points().transpose();  // d x M, columns contiguous per particle
  const NormalField nf(seed);
  std::atomic<std::int64_t> first_bad{-1};

  for (int k = 0; k < n; ++k) {
    const Scalar t = Scalar(grid.node(k));
    const EnsembleT<Scalar>* mu = flow ? &flow->at(k) : nullptr;
    parallel_for(m, opts.threads, [&, k, t, mu](std::int64_t i0, std::int64_t i1) {
      VectorX<Scalar> b(d), dw(d);
      MatrixX<Scalar> sig(d, d);
      for (std::int64_t i = i0; i < i1; ++i) {
        auto x = state.col(i);
        if (noise_override) {
          dw = (*noise_override)[k].row(i).transpose();
        } else {
          for (int j = 0; j < d; j += 2) {
            const auto pr = nf.pair(std::uint32_t(i), std::uint32_t(k), std::uint32_t(j >> 1));
            dw(j) = sdt * Scalar(pr[0]);
            if (j + 1 < d) dw(j + 1) = sdt * Scalar(pr[1]);
          }
        }
        spec.drift(t, x, mu, b);
        spec.diffusion(t, x, mu, sig);
        state.col(i) += b * dt + sig * dw;
        if (opts.keep_noise) out.increments[k].row(i) = dw.transpose();
        if (!state.col(i).allFinite()) {
          std::int64_t expect = -1;
          first_bad.compare_exchange_strong(expect, i * (n + 1) + (k + 1));
        }
      }
    });
    detail::throw_if_bad<Scalar>(first_bad, n);
    if (opts.keep_paths) out.snapshots[k + 1] = state.transpose();
  }
  out.snapshots.back() = state.transpose();
  return out;
}

template <class Scalar>
struct ParticleSystemResult {
  PathBundleT<Scalar> bundle;
  std::optional<MeasureFlowT<Scalar>> flow;
};

/// Interacting particle system: the empirical measure of the M particles is
/// the measure argument at every step; returns paths plus the realized flow.
template <class Scalar>
ParticleSystemResult<Scalar> particle_system(const CoefficientSpecT<Scalar>& spec,
                                             const EnsembleT<Scalar>& x0, const TimeGrid& grid,
                                             std::uint64_t seed, const RunOptions& opts = {}) {
  const int d = spec.dim;
  const Eigen::Index m = x0.size();
  if (x0.dim() != d) throw std::invalid_argument("particle_system: dimension mismatch");
  const int n = grid.n_steps();
  const Scalar dt = Scalar(grid.dt());
  const Scalar sdt = std::sqrt(dt);

  ParticleSystemResult<Scalar> out;
  out.bundle.grid = grid;
  out.bundle.seed = seed;
  if (opts.keep_noise) out.bundle.increments.assign(n, MatrixX<Scalar>(m, d));
  out.bundle.snapshots.assign(opts.keep_paths ? n + 1 : 2, MatrixX<Scalar>(m, d));
  out.bundle.snapshots[0] = x0.points();

  std::vector<EnsembleT<Scalar>> flow_ensembles;
  if (opts.keep_flow) {
    flow_ensembles.reserve(n + 1);
    flow_ensembles.push_back(x0);
  }

  MatrixX<Scalar> state = x0.points().transpose();
  const NormalField nf(seed);
  std::atomic<std::int64_t> first_bad{-1};

  for (int k = 0; k < n; ++k) {
    const Scalar t = Scalar(grid.node(k));
    const EnsembleT<Scalar> current(state.transpose());  // synchronization point
    parallel_for(m, opts.threads, [&, k, t](std::int64_t i0, std::int64_t i1) {
      VectorX<Scalar> b(d), dw(d);
      MatrixX<Scalar> sig(d, d);
      for (std::int64_t i = i0; i < i1; ++i) {
        auto x = state.col(i);
        for (int j = 0; j < d; j += 2) {
          const auto pr = nf.pair(std::uint32_t(i), std::uint32_t(k), std::uint32_t(j >> 1));
          dw(j) = sdt * Scalar(pr[0]);
          if (j + 1 < d) dw(j + 1) = sdt * Scalar(pr[1]);
        }
        spec.drift(t, x, &current, b);
        spec.diffusion(t, x, &current, sig);
        state.col(i) += b * dt + sig * dw;
        if (opts.keep_noise) out.bundle.increments[k].row(i) = dw.transpose();
        if (!state.col(i).allFinite()) {
          std::int64_t expect = -1;
          first_bad.compare_exchange_strong(expect, i * (n + 1) + (k + 1));
        }
      }
    });
    detail::throw_if_bad<Scalar>(first_bad, n);
    if (opts.keep_paths) out.bundle.snapshots[k + 1] = state.transpose();
    if (opts.keep_flow) flow_ensembles.emplace_back(MatrixX<Scalar>(state.transpose()));
  }
  out.bundle.snapshots.back() = state.transpose();
  if (opts.keep_flow) out.flow = MeasureFlowT<Scalar>(grid, std::move(flow_ensembles));
  return out;
}

/// Max over grid nodes of W_theta between two flows on the same grid.
template <class Scalar>
Scalar flow_distance(const MeasureFlowT<Scalar>& a, const MeasureFlowT<Scalar>& b, Scalar theta,
                     Eigen::Index cap = kExactAssignmentCap) {
  if (!(a.grid() == b.grid())) throw std::invalid_argument("flow_distance: grid mismatch");
  Scalar worst = 0;
  for (int k = 0; k < a.grid().n_nodes(); ++k)
    worst = std::max(worst, w_theta_auto(a.at(k), b.at(k), theta, cap));
  return worst;
}

/// W_theta between consecutive ensembles: the flow's discrete modulus of
/// continuity, one entry per step.
template <class Scalar>
VectorX<Scalar> flow_modulus(const MeasureFlowT<Scalar>& flow, Scalar theta,
                             Eigen::Index cap = kExactAssignmentCap) {
  VectorX<Scalar> out(flow.grid().n_steps());
  for (int k = 0; k < flow.grid().n_steps(); ++k)
    out(k) = w_theta_auto(flow.at(k), flow.at(k + 1), theta, cap);
  return out;
}

template <class Scalar>
struct PicardResult {
  MeasureFlowT<Scalar> flow;
  std::vector<Scalar> gaps;  // gaps[j] = sup_t W_theta(flow_{j+2}, flow_{j+1})
};

struct PicardError : std::runtime_error {
  PicardError(std::string what_, std::vector<double> gaps_)
      : std::runtime_error(std::move(what_)), gaps(std::move(gaps_)) {}
  std::vector<double> gaps;
};

/// Picard iteration on measure flows: starting from the constant-in-time
/// initial flow, repeatedly solve the frozen-flow SDE and replace the flow by
/// the realized law. The same seed is reused across iterations (common random
/// numbers), so for measure-free coefficients one solve already fixes the
/// flow and the first reported gap is zero.
template <class Scalar>
PicardResult<Scalar> picard(const CoefficientSpecT<Scalar>& spec, const EnsembleT<Scalar>& x0,
                            const TimeGrid& grid, Scalar theta, Scalar tol, int max_iter,
                            std::uint64_t seed, const RunOptions& opts_in = {}) {
  RunOptions opts = opts_in;
  opts.keep_paths = true;
  opts.keep_noise = false;

  auto solve = [&](const MeasureFlowT<Scalar>& frozen) {
    const PathBundleT<Scalar> b = euler_frozen(spec, &frozen, x0, grid, seed, opts);
    std::vector<EnsembleT<Scalar>> ens;
    ens.reserve(grid.n_nodes());
    for (int k = 0; k < grid.n_nodes(); ++k) ens.emplace_back(b.snapshots[k]);
    return MeasureFlowT<Scalar>(grid, std::move(ens));
  };

  MeasureFlowT<Scalar> flow = solve(MeasureFlowT<Scalar>::constant(grid, x0));
  std::vector<Scalar> gaps;
  for (int it = 0; it < max_iter; ++it) {
    MeasureFlowT<Scalar> next = solve(flow);
    const Scalar gap = flow_distance(next, flow, theta);
    gaps.push_back(gap);
    flow = std::move(next);
    if (gap <= tol) return {std::move(flow), std::move(gaps)};
  }
  throw PicardError("picard: no convergence within max_iter (horizon may exceed the contraction window)",
                    std::vector<double>(gaps.begin(), gaps.end()));
}

/// Sums groups of `factor` fine increments into coarse ones (same Brownian
/// path on a coarser grid).
template <class Scalar>
std::vector<MatrixX<Scalar>> coarsen_increments(const std::vector<MatrixX<Scalar>>& fine, int factor) {
  if (fine.size() % factor != 0)
    throw std::invalid_argument("coarsen_increments: step count not divisible by factor");
  std::vector<MatrixX<Scalar>> coarse(fine.size() / factor);
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    coarse[k] = fine[k * factor];
    for (int j = 1; j < factor; ++j) coarse[k] += fine[k * factor + j];
  }
  return coarse;
}

}  // namespace mvsde
