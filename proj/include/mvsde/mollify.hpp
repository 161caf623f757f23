#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mvsde/coefficients.hpp"
#include "mvsde/common.hpp"

namespace mvsde {

/// Gauss-Legendre nodes and weights on [-1, 1] via Newton iteration on the
/// Legendre polynomial.
template <class Scalar>
std::pair<VectorX<Scalar>, VectorX<Scalar>> gauss_legendre(int n) {
  if (n < 2) throw std::invalid_argument("gauss_legendre: need at least 2 nodes");
  VectorX<Scalar> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    Scalar z = std::cos(M_PI * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
    Scalar pp = 0;
    for (int it = 0; it < 100; ++it) {
      Scalar p0 = 1, p1 = 0;
      for (int j = 0; j < n; ++j) {
        const Scalar p2 = p1;
        p1 = p0;
        p0 = ((2 * j + 1) * z * p1 - j * p2) / (j + 1);
      }
      pp = Scalar(n) * (z * p0 - p1) / (z * z - 1);
      const Scalar dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < Scalar(1e-15)) break;
    }
    x(i) = z;
    w(i) = Scalar(2) / ((1 - z * z) * pp * pp);
  }
  return {x, w};
}

/// Principal square root of a symmetric positive-semidefinite matrix.
/// Eigenvalues in [-1e-10, 0) are clamped to zero.
template <class Scalar>
MatrixX<Scalar> psd_sqrt(const MatrixX<Scalar>& a) {
  const Scalar scale = std::max<Scalar>(a.template lpNorm<Eigen::Infinity>(), Scalar(1));
  if ((a - a.transpose()).template lpNorm<Eigen::Infinity>() > Scalar(1e-8) * scale)
    throw std::invalid_argument("psd_sqrt: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(Scalar(0.5) * (a + a.transpose()));
  VectorX<Scalar> lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < Scalar(-1e-10) * scale)
      throw std::invalid_argument("psd_sqrt: eigenvalue below -1e-10");
    lam(i) = std::sqrt(std::max(lam(i), Scalar(0)));
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

struct MollifyOptions {
  int nodes_per_axis = 8;  // Gauss-Legendre nodes per axis of the support window
  double t_max = 1.0;      // coefficients extend as b = 0, a = I outside [0, t_max]
};

/// Space-time mollification of a coefficient pair: returns the convolved
/// drift b_n and diffusion sqrt(a_n) with a_n = (sigma sigma^T) * rho_n,
/// rho_n(r, x) = n^{d+1} rho(n r, n x) for a tensor bump rho normalized by
/// the same quadrature rule used for the convolution. The normalization makes
/// the convolution an exact convex combination, so constants pass through
/// unchanged and spectral windows are preserved.
template <class Scalar>
CoefficientSpecT<Scalar> mollify(const CoefficientSpecT<Scalar>& base, int n,
                                 const MollifyOptions& opt = {}) {
  if (n < 1) throw std::invalid_argument("mollify: n >= 1 required");
  if (opt.nodes_per_axis < 2) throw std::invalid_argument("mollify: too few quadrature nodes");
  const int d = base.dim;

  auto [nodes, weights] = gauss_legendre<Scalar>(opt.nodes_per_axis);
  auto bump = [](Scalar u) {
    return std::abs(u) < Scalar(1) ? std::exp(Scalar(-1) / (1 - u * u)) : Scalar(0);
  };
  // per-axis normalized weights w_i * rho(u_i) / sum_j w_j * rho(u_j)
  VectorX<Scalar> axis_w(opt.nodes_per_axis);
  for (int i = 0; i < opt.nodes_per_axis; ++i) axis_w(i) = weights(i) * bump(nodes(i));
  axis_w /= axis_w.sum();

  struct Shared {
    CoefficientSpecT<Scalar> base;
    VectorX<Scalar> nodes, axis_w;
    int n, d, m;
    Scalar t_max;
  };
  auto sh = std::make_shared<Shared>(Shared{base, nodes, axis_w, n, d, opt.nodes_per_axis,
                                            Scalar(opt.t_max)});

  // iterate the tensor grid over (time, space...) offsets
  auto for_each_offset = [sh](auto&& fn) {
    std::vector<int> idx(sh->d + 1, 0);
    while (true) {
      Scalar wgt = 1;
      for (int a = 0; a <= sh->d; ++a) wgt *= sh->axis_w(idx[a]);
      fn(idx, wgt);
      int a = 0;
      for (; a <= sh->d; ++a) {
        if (++idx[a] < sh->m) break;
        idx[a] = 0;
      }
      if (a > sh->d) break;
    }
  };

  CoefficientSpecT<Scalar> out = base;
  out.has_singular_drift = false;
  out.diffusion_constant = false;
  out.drift = [sh, for_each_offset](Scalar t, ConstVecRef<Scalar> x, const EnsembleT<Scalar>* mu,
                                    VecRef<Scalar> out_v) {
    out_v.setZero();
    VectorX<Scalar> tmp(sh->d), xs(sh->d);
    for_each_offset([&](const std::vector<int>& idx, Scalar wgt) {
      const Scalar ts = t - sh->nodes(idx[0]) / Scalar(sh->n);
      if (ts < 0 || ts > sh->t_max) return;  // b extends by zero outside [0, t_max]
      for (int a = 0; a < sh->d; ++a) xs(a) = x(a) - sh->nodes(idx[a + 1]) / Scalar(sh->n);
      sh->base.drift(ts, xs, mu, tmp);
      out_v += wgt * tmp;
    });
  };
  out.diffusion = [sh, for_each_offset](Scalar t, ConstVecRef<Scalar> x, const EnsembleT<Scalar>* mu,
                                        MatRef<Scalar> out_m) {
    MatrixX<Scalar> acc = MatrixX<Scalar>::Zero(sh->d, sh->d);
    MatrixX<Scalar> tmp(sh->d, sh->d);
    VectorX<Scalar> xs(sh->d);
    for_each_offset([&](const std::vector<int>& idx, Scalar wgt) {
      const Scalar ts = t - sh->nodes(idx[0]) / Scalar(sh->n);
      if (ts < 0 || ts > sh->t_max) {
        acc += wgt * MatrixX<Scalar>::Identity(sh->d, sh->d);  // a = I outside [0, t_max]
        return;
      }
      for (int a = 0; a < sh->d; ++a) xs(a) = x(a) - sh->nodes(idx[a + 1]) / Scalar(sh->n);
      sh->base.diffusion(ts, xs, mu, tmp);
      acc += wgt * tmp * tmp.transpose();
    });
    out_m = psd_sqrt(acc);
  };
  return out;
}

}  // namespace mvsde
