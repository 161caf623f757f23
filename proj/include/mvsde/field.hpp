#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mvsde/common.hpp"

namespace mvsde {

/// Scalar field sampled on a space-time lattice: time nodes (possibly a
/// single one, meaning constant in time) times a tensor lattice over a box.
/// Lattice nodes include the box endpoints; the field is zero outside its box.
template <class Scalar = double>
struct GridFieldT {
  std::vector<Scalar> times;  // ascending; size 1 = static field
  VectorX<Scalar> box_lo, box_hi;
  Eigen::VectorXi counts;      // nodes per axis, >= 2
  std::vector<Scalar> values;  // [time][x0][x1]... row-major

  int spatial_dim() const { return int(counts.size()); }
  Eigen::Index spatial_nodes() const {
    Eigen::Index n = 1;
    for (int a = 0; a < counts.size(); ++a) n *= counts(a);
    return n;
  }
  Scalar spacing(int axis) const { return (box_hi(axis) - box_lo(axis)) / Scalar(counts(axis) - 1); }
  Scalar min_spacing() const {
    Scalar h = spacing(0);
    for (int a = 1; a < counts.size(); ++a) h = std::min(h, spacing(a));
    return h;
  }
  Scalar box_diameter() const { return (box_hi - box_lo).norm(); }

  Scalar& at(Eigen::Index time_idx, Eigen::Index flat) { return values[time_idx * spatial_nodes() + flat]; }
  Scalar at(Eigen::Index time_idx, Eigen::Index flat) const {
    return values[time_idx * spatial_nodes() + flat];
  }

  VectorX<Scalar> node(Eigen::Index flat) const {
    VectorX<Scalar> x(spatial_dim());
    for (int a = spatial_dim() - 1; a >= 0; --a) {
      const Eigen::Index i = flat % counts(a);
      flat /= counts(a);
      x(a) = box_lo(a) + Scalar(i) * spacing(a);
    }
    return x;
  }

  bool inside_box(ConstVecRef<Scalar> x) const {
    for (int a = 0; a < spatial_dim(); ++a)
      if (x(a) < box_lo(a) || x(a) > box_hi(a)) return false;
    return true;
  }

  /// Multilinear in space, linear in time; zero outside the box.
  Scalar eval(Scalar t, ConstVecRef<Scalar> x) const {
    if (!inside_box(x)) return Scalar(0);
    const int d = spatial_dim();
    std::vector<Eigen::Index> i0(d);
    std::vector<Scalar> w(d);
    for (int a = 0; a < d; ++a) {
      const Scalar u = (x(a) - box_lo(a)) / spacing(a);
      Eigen::Index i = std::min<Eigen::Index>(Eigen::Index(u), counts(a) - 2);
      i0[a] = std::max<Eigen::Index>(i, 0);
      w[a] = std::min<Scalar>(std::max<Scalar>(u - Scalar(i0[a]), 0), 1);
    }
    auto corner_sum = [&](Eigen::Index time_idx) {
      Scalar acc = 0;
      for (Eigen::Index corner = 0; corner < (Eigen::Index(1) << d); ++corner) {
        Scalar weight = 1;
        Eigen::Index flat = 0;
        for (int a = 0; a < d; ++a) {
          const bool hi = (corner >> a) & 1;
          weight *= hi ? w[a] : (Scalar(1) - w[a]);
          flat = flat * counts(a) + i0[a] + (hi ? 1 : 0);
        }
        acc += weight * at(time_idx, flat);
      }
      return acc;
    };
    if (times.size() == 1) return corner_sum(0);
    if (t <= times.front()) return corner_sum(0);
    if (t >= times.back()) return corner_sum(Eigen::Index(times.size()) - 1);
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const Eigen::Index k = std::distance(times.begin(), it) - 1;
    const Scalar lam = (t - times[k]) / (times[k + 1] - times[k]);
    return (Scalar(1) - lam) * corner_sum(k) + lam * corner_sum(k + 1);
  }
};

using GridField = GridFieldT<double>;

template <class Scalar = double>
GridFieldT<Scalar> make_grid_field(std::vector<Scalar> times, const VectorX<Scalar>& lo,
                                   const VectorX<Scalar>& hi, const Eigen::VectorXi& counts,
                                   const std::function<Scalar(Scalar, const VectorX<Scalar>&)>& fn) {
  if (times.empty()) throw std::invalid_argument("make_grid_field: need at least one time node");
  if (lo.size() != hi.size() || lo.size() != counts.size())
    throw std::invalid_argument("make_grid_field: axis mismatch");
  for (int a = 0; a < counts.size(); ++a) {
    if (counts(a) < 2) throw std::invalid_argument("make_grid_field: need >= 2 nodes per axis");
    if (!(lo(a) < hi(a))) throw std::invalid_argument("make_grid_field: empty box");
  }
  GridFieldT<Scalar> f;
  f.times = std::move(times);
  f.box_lo = lo;
  f.box_hi = hi;
  f.counts = counts;
  f.values.resize(f.times.size() * f.spatial_nodes());
  for (std::size_t k = 0; k < f.times.size(); ++k)
    for (Eigen::Index i = 0; i < f.spatial_nodes(); ++i)
      f.at(k, i) = fn(f.times[k], f.node(i));
  if (!std::all_of(f.values.begin(), f.values.end(), [](Scalar v) { return std::isfinite(v); }))
    throw std::invalid_argument("make_grid_field: non-finite value");
  return f;
}

/// ||f||_{L^q_p(s,t)} = ( int_s^t ( int |f_r|^p dx )^{q/p} dr )^{1/q}.
/// Spatial integral by left-node Riemann sums over the box (exact for
/// box-constant fields); time integral by trapezoid on the node values of the
/// inner integral raised to q/p. A static field is constant in time.
template <class Scalar>
Scalar lpq_norm(const GridFieldT<Scalar>& f, Scalar p, Scalar q, Scalar s, Scalar t) {
  if (!(p >= 1) || !(q >= 1)) throw std::invalid_argument("lpq_norm: p, q >= 1 required");
  if (t < s) throw std::invalid_argument("lpq_norm: need s <= t");
  if (t == s) return Scalar(0);

  Scalar cell = 1;
  for (int a = 0; a < f.counts.size(); ++a) cell *= f.spacing(a);
  auto inner = [&](Eigen::Index time_idx) {
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < f.spatial_nodes(); ++i) {
      // left-node rule: skip nodes on the upper face of any axis
      Eigen::Index flat = i;
      bool upper = false;
      for (int a = f.spatial_dim() - 1; a >= 0; --a) {
        if (flat % f.counts(a) == f.counts(a) - 1) upper = true;
        flat /= f.counts(a);
      }
      if (upper) continue;
      acc += std::pow(std::abs(f.at(time_idx, i)), p);
    }
    return acc * cell;
  };

  if (f.times.size() == 1) {
    return std::pow(std::pow(inner(0), q / p) * (t - s), Scalar(1) / q);
  }
  if (s < f.times.front() - Scalar(1e-12) || t > f.times.back() + Scalar(1e-12))
    throw std::invalid_argument("lpq_norm: [s,t] outside the field's time range");

  std::vector<Scalar> g(f.times.size());
  for (std::size_t k = 0; k < f.times.size(); ++k) g[k] = std::pow(inner(Eigen::Index(k)), q / p);
  auto g_at = [&](Scalar r) {
    if (r <= f.times.front()) return g.front();
    if (r >= f.times.back()) return g.back();
    const auto it = std::upper_bound(f.times.begin(), f.times.end(), r);
    const std::size_t k = std::size_t(std::distance(f.times.begin(), it)) - 1;
    const Scalar lam = (r - f.times[k]) / (f.times[k + 1] - f.times[k]);
    return (1 - lam) * g[k] + lam * g[k + 1];
  };
  Scalar acc = 0;
  Scalar prev_r = s, prev_g = g_at(s);
  for (std::size_t k = 0; k < f.times.size(); ++k) {
    const Scalar r = f.times[k];
    if (r <= s || r >= t) continue;
    acc += (r - prev_r) * (prev_g + g[k]) / 2;
    prev_r = r;
    prev_g = g[k];
  }
  acc += (t - prev_r) * (prev_g + g_at(t)) / 2;
  return std::pow(acc, Scalar(1) / q);
}

struct MaximalOptions {
  double radius_ratio = 1.05;  // geometric radius grid
};

/// Hardy-Littlewood maximal value sup_r avg_{B(x,r)} h at a point, for a
/// nonnegative static field extended by zero outside its box. Ball averages
/// are node averages over the zero-extended lattice and open balls; the
/// radius grid runs geometrically from the lattice spacing to the diameter.
template <class Scalar>
Scalar maximal_function(const GridFieldT<Scalar>& h, const VectorX<Scalar>& x,
                        const MaximalOptions& opt = {}) {
  if (h.times.size() != 1) throw std::invalid_argument("maximal_function: static field required");
  if (!h.inside_box(x)) throw std::invalid_argument("maximal_function: x outside box");
  const int d = h.spatial_dim();

  auto ball_average = [&](Scalar r) {
    // recurse over axes on the infinite lattice {lo + k h}; nodes outside the
    // box contribute 0 to the sum but count in the denominator
    Scalar sum = 0;
    std::int64_t count = 0;
    std::vector<Eigen::Index> idx(d);
    std::function<void(int, Scalar)> rec = [&](int axis, Scalar rem_sq) {
      const Scalar hs = h.spacing(axis);
      const Scalar rad = std::sqrt(rem_sq);
      const Scalar center = (x(axis) - h.box_lo(axis)) / hs;
      const auto k_lo = Eigen::Index(std::ceil(center - rad / hs));
      const auto k_hi = Eigen::Index(std::floor(center + rad / hs));
      for (Eigen::Index k = k_lo; k <= k_hi; ++k) {
        const Scalar off = (Scalar(k) - center) * hs;
        const Scalar rem = rem_sq - off * off;
        if (rem <= 0) continue;  // open ball
        idx[axis] = k;
        if (axis + 1 == d) {
          ++count;
          bool in = true;
          Eigen::Index flat = 0;
          for (int a = 0; a < d; ++a) {
            if (idx[a] < 0 || idx[a] >= h.counts(a)) {
              in = false;
              break;
            }
            flat = flat * h.counts(a) + idx[a];
          }
          if (in) sum += h.at(0, flat);
        } else {
          rec(axis + 1, rem);
        }
      }
    };
    rec(0, r * r);
    return count > 0 ? sum / Scalar(count) : Scalar(0);
  };

  const Scalar r0 = h.min_spacing();
  const Scalar r_max = h.box_diameter();
  Scalar best = 0;
  for (Scalar r = r0; r < r_max * opt.radius_ratio; r *= Scalar(opt.radius_ratio))
    best = std::max(best, ball_average(std::min(r, r_max)));
  return best;
}

template <class Scalar>
struct HardyReport {
  Scalar max_ratio{};
  Scalar empirical_constant{};  // alias of max_ratio, the fitted C
  int pairs_used = 0;
  int pairs_skipped = 0;  // zero-denominator pairs
};

/// Pointwise bound diagnostic: ratio |f(x)-f(y)| / (|x-y| (M|grad f|(x) +
/// M|grad f|(y))) over lattice node pairs; gradient by central differences
/// when not supplied. Reports the empirical constant max ratio.
template <class Scalar>
HardyReport<Scalar> hardy_pointwise_check(const GridFieldT<Scalar>& f,
                                          const std::vector<std::pair<Eigen::Index, Eigen::Index>>& pairs,
                                          const GridFieldT<Scalar>* grad_norm = nullptr,
                                          const MaximalOptions& opt = {}) {
  if (f.times.size() != 1) throw std::invalid_argument("hardy_pointwise_check: static field required");
  const int d = f.spatial_dim();

  GridFieldT<Scalar> g;
  if (grad_norm) {
    g = *grad_norm;
  } else {
    g = f;
    for (Eigen::Index i = 0; i < f.spatial_nodes(); ++i) {
      VectorX<Scalar> grad(d);
      Eigen::Index rem = i;
      std::vector<Eigen::Index> idx(d);
      for (int a = d - 1; a >= 0; --a) {
        idx[a] = rem % f.counts(a);
        rem /= f.counts(a);
      }
      for (int a = 0; a < d; ++a) {
        Eigen::Index stride = 1;
        for (int b = a + 1; b < d; ++b) stride *= f.counts(b);
        const Scalar hs = f.spacing(a);
        if (idx[a] == 0)
          grad(a) = (f.at(0, i + stride) - f.at(0, i)) / hs;
        else if (idx[a] == f.counts(a) - 1)
          grad(a) = (f.at(0, i) - f.at(0, i - stride)) / hs;
        else
          grad(a) = (f.at(0, i + stride) - f.at(0, i - stride)) / (2 * hs);
      }
      g.at(0, i) = grad.norm();
    }
  }

  std::vector<Scalar> mg(f.spatial_nodes(), Scalar(-1));
  auto maximal_at = [&](Eigen::Index i) {
    if (mg[i] < 0) mg[i] = maximal_function(g, f.node(i), opt);
    return mg[i];
  };

  HardyReport<Scalar> rep;
  for (const auto& [i, j] : pairs) {
    const VectorX<Scalar> xi = f.node(i), xj = f.node(j);
    const Scalar den = (xi - xj).norm() * (maximal_at(i) + maximal_at(j));
    if (den < Scalar(1e-300)) {
      ++rep.pairs_skipped;
      continue;
    }
    ++rep.pairs_used;
    rep.max_ratio = std::max(rep.max_ratio, std::abs(f.at(0, i) - f.at(0, j)) / den);
  }
  rep.empirical_constant = rep.max_ratio;
  return rep;
}

}  // namespace mvsde
