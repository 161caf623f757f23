#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvsde/common.hpp"
#include "mvsde/ensemble.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/transport.hpp"

namespace mvsde {

/// Evaluable drift b_t(x, mu) and diffusion sigma_t(x, mu) with structure
/// flags. Evaluators write into preallocated outputs; `mu` may be null for
/// measure-free coefficients.
template <class Scalar = double>
struct CoefficientSpecT {
  using Drift = std::function<void(Scalar, ConstVecRef<Scalar>, const EnsembleT<Scalar>*, VecRef<Scalar>)>;
  using Diffusion =
      std::function<void(Scalar, ConstVecRef<Scalar>, const EnsembleT<Scalar>*, MatRef<Scalar>)>;

  Drift drift;
  Diffusion diffusion;
  int dim = 1;
  bool diffusion_distribution_free = false;  // sigma = sigma_t(x)
  bool diffusion_state_free = false;         // sigma = sigma_t(mu)
  bool diffusion_constant = false;           // sigma independent of (t, x, mu)
  bool has_singular_drift = false;
  Scalar K = Scalar(1);  // ellipticity / bound constant
  Scalar L = Scalar(0);  // measure-Lipschitz constant

  VectorX<Scalar> drift_at(Scalar t, const VectorX<Scalar>& x, const EnsembleT<Scalar>* mu) const {
    VectorX<Scalar> out(dim);
    drift(t, x, mu, out);
    return out;
  }
  MatrixX<Scalar> diffusion_at(Scalar t, const VectorX<Scalar>& x, const EnsembleT<Scalar>* mu) const {
    MatrixX<Scalar> out(dim, dim);
    diffusion(t, x, mu, out);
    return out;
  }
};

using CoefficientSpec = CoefficientSpecT<double>;

// ---------------------------------------------------------------------------
// Shipped coefficient families
// ---------------------------------------------------------------------------

template <class Scalar = double>
CoefficientSpecT<Scalar> drift_zero_diffusion_identity(int d) {
  CoefficientSpecT<Scalar> spec;
  spec.dim = d;
  spec.drift = [](Scalar, ConstVecRef<Scalar>, const EnsembleT<Scalar>*, VecRef<Scalar> out) {
    out.setZero();
  };
  spec.diffusion = [](Scalar, ConstVecRef<Scalar>, const EnsembleT<Scalar>*, MatRef<Scalar> out) {
    out.setIdentity();
  };
  spec.diffusion_distribution_free = true;
  spec.diffusion_state_free = true;
  spec.diffusion_constant = true;
  return spec;
}

template <class Scalar = double>
CoefficientSpecT<Scalar> drift_constant(const VectorX<Scalar>& c) {
  auto spec = drift_zero_diffusion_identity<Scalar>(int(c.size()));
  spec.drift = [c](Scalar, ConstVecRef<Scalar>, const EnsembleT<Scalar>*, VecRef<Scalar> out) {
    out = c;
  };
  return spec;
}

/// b(t, x, mu) = A x + B mean(mu) + c.
template <class Scalar = double>
CoefficientSpecT<Scalar> drift_affine_meanfield(Scalar a, Scalar b, const VectorX<Scalar>& c) {
  auto spec = drift_zero_diffusion_identity<Scalar>(int(c.size()));
  spec.drift = [a, b, c](Scalar, ConstVecRef<Scalar> x, const EnsembleT<Scalar>* mu, VecRef<Scalar> out) {
    out = a * x + c;
    if (b != Scalar(0)) {
      if (!mu) throw std::invalid_argument("affine_meanfield drift needs a measure argument");
      out += b * mu->mean();
    }
  };
  spec.L = std::abs(b);
  return spec;
}

/// Singular drift beta * x / |x|^(1+alpha) on 0 < |x| <= 1, zero elsewhere and
/// exactly zero at the origin. |b|^2 lies in L^q_p for 2 alpha p < 1 in d = 1.
template <class Scalar = double>
CoefficientSpecT<Scalar> drift_singular(Scalar alpha, Scalar beta, int d) {
  auto spec = drift_zero_diffusion_identity<Scalar>(d);
  spec.drift = [alpha, beta](Scalar, ConstVecRef<Scalar> x, const EnsembleT<Scalar>*, VecRef<Scalar> out) {
    const Scalar r = x.norm();
    if (r == Scalar(0) || r > Scalar(1)) {
      out.setZero();
      return;
    }
    out = beta * x / std::pow(r, Scalar(1) + alpha);
  };
  spec.has_singular_drift = true;
  return spec;
}

/// Bounded Hoelder(1/2) drift used by the Zvonkin demonstration:
/// b(x) = c sign(x) min(|x|, 1)^(1/2) componentwise.
template <class Scalar = double>
CoefficientSpecT<Scalar> drift_dini_example(Scalar c, int d) {
  auto spec = drift_zero_diffusion_identity<Scalar>(d);
  spec.drift = [c](Scalar, ConstVecRef<Scalar> x, const EnsembleT<Scalar>*, VecRef<Scalar> out) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const Scalar a = std::min(std::abs(x(j)), Scalar(1));
      out(j) = c * (x(j) < 0 ? -std::sqrt(a) : std::sqrt(a));
    }
  };
  return spec;
}

template <class Scalar = double>
void set_diffusion_scalar(CoefficientSpecT<Scalar>& spec, Scalar s) {
  spec.diffusion = [s](Scalar, ConstVecRef<Scalar>, const EnsembleT<Scalar>*, MatRef<Scalar> out) {
    out.setIdentity();
    out *= s;
  };
  spec.diffusion_distribution_free = true;
  spec.diffusion_state_free = true;
  spec.diffusion_constant = true;
  spec.K = std::max(s * s, Scalar(1) / (s * s));
}

/// State-dependent elliptic diffusion sigma(x) = (base + amp sin(x_1)) I,
/// elliptic when |amp| < base.
template <class Scalar = double>
void set_diffusion_sin(CoefficientSpecT<Scalar>& spec, Scalar base, Scalar amp) {
  if (!(std::abs(amp) < base)) throw std::invalid_argument("set_diffusion_sin: need |amp| < base");
  spec.diffusion = [base, amp](Scalar, ConstVecRef<Scalar> x, const EnsembleT<Scalar>*, MatRef<Scalar> out) {
    out.setIdentity();
    out *= base + amp * std::sin(x(0));
  };
  spec.diffusion_distribution_free = true;
  spec.diffusion_state_free = false;
  spec.diffusion_constant = false;
  const Scalar hi = base + std::abs(amp);
  spec.K = hi * hi;
}

// ---------------------------------------------------------------------------
// Integral-type coefficients
// ---------------------------------------------------------------------------

/// Coefficients whose measure dependence enters through kernel averages
/// r = mu(psi(t, x, .)): b = B(t, x, r_b), sigma = Sigma(t, x, r_sigma).
template <class Scalar = double>
struct IntegralTypeSpecT {
  using Kernel = std::function<VectorX<Scalar>(Scalar, ConstVecRef<Scalar>, ConstVecRef<Scalar>)>;
  using OuterDrift = std::function<VectorX<Scalar>(Scalar, ConstVecRef<Scalar>, ConstVecRef<Scalar>)>;
  using OuterDiffusion = std::function<MatrixX<Scalar>(Scalar, ConstVecRef<Scalar>, ConstVecRef<Scalar>)>;

  Kernel psi_b;
  Kernel psi_sigma;
  OuterDrift outer_b;
  OuterDiffusion outer_sigma;
  int d = 1;
  int k = 1;
  Scalar kernel_lipschitz = Scalar(0);  // declared delta
  Scalar kernel_bound = Scalar(0);      // declared sup norm
};

using IntegralTypeSpec = IntegralTypeSpecT<double>;

template <class Scalar>
std::pair<VectorX<Scalar>, MatrixX<Scalar>> eval_integral_type(const IntegralTypeSpecT<Scalar>& spec,
                                                               Scalar t, const VectorX<Scalar>& x,
                                                               const EnsembleT<Scalar>& mu) {
  VectorX<Scalar> rb = VectorX<Scalar>::Zero(spec.k), rs = VectorX<Scalar>::Zero(spec.k);
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    const VectorX<Scalar> y = mu.point(j);
    rb += spec.psi_b(t, x, y);
    rs += spec.psi_sigma(t, x, y);
  }
  rb /= Scalar(mu.size());
  rs /= Scalar(mu.size());
  if (!rb.allFinite() || !rs.allFinite())
    throw std::runtime_error("eval_integral_type: non-finite kernel average");
  return {spec.outer_b(t, x, rb), spec.outer_sigma(t, x, rs)};
}

template <class Scalar>
CoefficientSpecT<Scalar> coefficients_from_integral_type(IntegralTypeSpecT<Scalar> ispec) {
  CoefficientSpecT<Scalar> spec;
  spec.dim = ispec.d;
  auto shared = std::make_shared<IntegralTypeSpecT<Scalar>>(std::move(ispec));
  spec.drift = [shared](Scalar t, ConstVecRef<Scalar> x, const EnsembleT<Scalar>* mu, VecRef<Scalar> out) {
    if (!mu) throw std::invalid_argument("integral-type drift needs a measure argument");
    out = eval_integral_type(*shared, t, VectorX<Scalar>(x), *mu).first;
  };
  spec.diffusion = [shared](Scalar t, ConstVecRef<Scalar> x, const EnsembleT<Scalar>* mu, MatRef<Scalar> out) {
    if (!mu) throw std::invalid_argument("integral-type diffusion needs a measure argument");
    out = eval_integral_type(*shared, t, VectorX<Scalar>(x), *mu).second;
  };
  return spec;
}

// ---------------------------------------------------------------------------
// Dini moduli
// ---------------------------------------------------------------------------

/// Spatial continuity moduli: hoelder phi(s) = c s^beta, and the log family
/// phi(s) = c (1 + log(1/s))^(-(1+eps)) for s <= 1, constant c above.
template <class Scalar = double>
struct DiniModulusT {
  enum class Family { hoelder, log_dini };
  Family family = Family::hoelder;
  Scalar c = Scalar(1);
  Scalar beta = Scalar(1);  // hoelder exponent in (0, 1]
  Scalar eps = Scalar(1);   // log family exponent (>0 integrable, =0 divergent)

  static DiniModulusT hoelder(Scalar c, Scalar beta) {
    if (!(beta > 0) || !(beta <= 1)) throw std::invalid_argument("hoelder: beta in (0,1] required");
    return {Family::hoelder, c, beta, Scalar(0)};
  }
  static DiniModulusT log_dini(Scalar c, Scalar eps) { return {Family::log_dini, c, Scalar(0), eps}; }

  Scalar operator()(Scalar s) const {
    if (s <= Scalar(0)) return Scalar(0);
    if (family == Family::hoelder) return c * std::pow(s, beta);
    if (s >= Scalar(1)) return c;
    return c * std::pow(Scalar(1) + std::log(Scalar(1) / s), -(Scalar(1) + eps));
  }

  /// phi(e^{-w}), stable for large w where e^{-w} underflows.
  Scalar log_scale_value(Scalar w) const {
    if (family == Family::hoelder) return c * std::exp(-beta * w);
    if (w <= Scalar(0)) return c;
    return c * std::pow(Scalar(1) + w, -(Scalar(1) + eps));
  }
};

using DiniModulus = DiniModulusT<double>;

template <class Scalar>
struct DiniReport {
  bool monotone = false;
  bool concave = false;  // second differences of phi^2 on the check grid
  Scalar max_second_difference{};
  Scalar integral{};  // of phi(s)/s over (0, 1]
  bool divergent = false;
  bool passes() const { return monotone && concave && !divergent; }
};

/// Checks membership diagnostics for the modulus class: monotone, phi^2
/// concave (raw second differences on a fine grid), and the Dini integral by
/// dyadically extended quadrature in w = log(1/s) with tail extrapolation.
template <class Scalar>
DiniReport<Scalar> dini_check(const DiniModulusT<Scalar>& phi) {
  DiniReport<Scalar> rep;
  const Scalar h = Scalar(1e-5);
  rep.monotone = true;
  rep.max_second_difference = -std::numeric_limits<Scalar>::infinity();
  Scalar prev2 = phi(h) * phi(h), prev1 = phi(2 * h) * phi(2 * h);
  if (phi(2 * h) + Scalar(1e-12) < phi(h)) rep.monotone = false;
  for (Scalar s = 3 * h; s <= Scalar(1); s += h) {
    const Scalar v = phi(s);
    const Scalar v2 = v * v;
    if (v + Scalar(1e-12) < std::sqrt(prev1)) rep.monotone = false;
    rep.max_second_difference = std::max(rep.max_second_difference, v2 - 2 * prev1 + prev2);
    prev2 = prev1;
    prev1 = v2;
  }
  rep.concave = rep.max_second_difference <= Scalar(1e-9);

  // integral of phi(s)/s ds = integral of phi(e^-w) dw over [0, inf)
  auto integrand = [&](Scalar w) { return phi.log_scale_value(w); };
  auto simpson = [&](Scalar a, Scalar b, int n) {
    const Scalar hh = (b - a) / n;
    Scalar s = integrand(a) + integrand(b);
    for (int i = 1; i < n; ++i) s += integrand(a + i * hh) * (i % 2 ? Scalar(4) : Scalar(2));
    return s * hh / 3;
  };
  Scalar total = simpson(Scalar(0), Scalar(5), 512);
  Scalar w_lo = Scalar(5);
  std::vector<Scalar> increments;
  for (int k = 0; k < 14; ++k) {
    const Scalar w_hi = w_lo * 2;
    increments.push_back(simpson(w_lo, w_hi, 512));
    total += increments.back();
    w_lo = w_hi;
  }
  const Scalar d_last = increments[increments.size() - 1];
  const Scalar d_prev = increments[increments.size() - 2];
  if (d_last > Scalar(1e-12) && d_last > Scalar(0.95) * d_prev) {
    rep.divergent = true;
    rep.integral = std::numeric_limits<Scalar>::infinity();
  } else {
    Scalar tail = 0;
    if (d_prev > 0 && d_last > 0 && d_last < d_prev) {
      const Scalar r = d_last / d_prev;
      tail = d_last * r / (1 - r);
    }
    rep.integral = total + tail;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Assumption validators
// ---------------------------------------------------------------------------

struct ValidationPlan {
  int n_tx_probes = 200;       // (t, x) draws for the ellipticity scan
  int n_measure_pairs = 40;    // ensemble pairs for the measure-Lipschitz scan
  int n_space_pairs = 200;     // (x, y) pairs for the Dini-ratio scan
  int probe_ensemble_size = 64;
  double t_max = 1.0;
  double box_halfwidth = 2.0;
  double theta = 2.0;
  std::uint64_t seed = 12345;
};

template <class Scalar>
struct BoundsReport {
  Scalar sigma_eig_min{};
  Scalar sigma_eig_max{};
  bool ellipticity_pass = false;
  Scalar max_measure_lipschitz_ratio{};
  bool measure_lipschitz_pass = false;
  Scalar max_dini_ratio{};
  bool dini_pass = false;
};

/// Spot-checks assumption constants on random probes: eigenvalue range of
/// sigma sigma^T against [1/K, K], empirical measure-Lipschitz ratios against
/// max(K, L), and spatial increments of the drift against the modulus phi.
template <class Scalar>
BoundsReport<Scalar> validate_bounds(const CoefficientSpecT<Scalar>& spec,
                                     const DiniModulusT<Scalar>& phi, const ValidationPlan& plan) {
  BoundsReport<Scalar> rep;
  NormalField nf(plan.seed);
  const int d = spec.dim;
  auto draw_x = [&](std::uint32_t stream, std::uint32_t step) {
    VectorX<Scalar> x(d);
    for (int j = 0; j < d; ++j)
      x(j) = Scalar(plan.box_halfwidth) * Scalar(2 * nf.uniform(stream, step, j) - 1);
    return x;
  };
  auto draw_ensemble = [&](std::uint32_t stream) {
    MatrixX<Scalar> pts(plan.probe_ensemble_size, d);
    for (int i = 0; i < plan.probe_ensemble_size; ++i)
      for (int j = 0; j < d; ++j)
        pts(i, j) = Scalar(2 * nf.normal(stream, std::uint32_t(i + 1), j));
    return EnsembleT<Scalar>(pts);
  };

  const EnsembleT<Scalar> base = draw_ensemble(0);

  // sigma sigma^T spectrum
  rep.sigma_eig_min = std::numeric_limits<Scalar>::infinity();
  rep.sigma_eig_max = -std::numeric_limits<Scalar>::infinity();
  for (int i = 0; i < plan.n_tx_probes; ++i) {
    const Scalar t = Scalar(plan.t_max * nf.uniform(1, std::uint32_t(i), 0));
    const VectorX<Scalar> x = draw_x(2, std::uint32_t(i));
    const MatrixX<Scalar> s = spec.diffusion_at(t, x, &base);
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(s * s.transpose());
    rep.sigma_eig_min = std::min(rep.sigma_eig_min, es.eigenvalues().minCoeff());
    rep.sigma_eig_max = std::max(rep.sigma_eig_max, es.eigenvalues().maxCoeff());
  }
  const Scalar tol = Scalar(1e-9);
  rep.ellipticity_pass =
      rep.sigma_eig_min >= Scalar(1) / spec.K - tol && rep.sigma_eig_max <= spec.K + tol;

  // measure-Lipschitz ratios |b(x, mu) - b(x, nu)| / W_theta(mu, nu)
  rep.max_measure_lipschitz_ratio = Scalar(0);
  for (int i = 0; i < plan.n_measure_pairs; ++i) {
    const EnsembleT<Scalar> mu = draw_ensemble(std::uint32_t(10 + 2 * i));
    const EnsembleT<Scalar> nu = draw_ensemble(std::uint32_t(11 + 2 * i));
    const Scalar w = w_theta_auto(mu, nu, Scalar(plan.theta));
    if (w < Scalar(1e-12)) continue;
    const Scalar t = Scalar(plan.t_max * nf.uniform(3, std::uint32_t(i), 0));
    const VectorX<Scalar> x = draw_x(4, std::uint32_t(i));
    const Scalar diff = (spec.drift_at(t, x, &mu) - spec.drift_at(t, x, &nu)).norm();
    rep.max_measure_lipschitz_ratio = std::max(rep.max_measure_lipschitz_ratio, diff / w);
  }
  rep.measure_lipschitz_pass =
      rep.max_measure_lipschitz_ratio <= std::max(spec.K, spec.L) + Scalar(1e-6);

  // Dini ratios |b(x, mu) - b(y, mu)| / phi(|x - y|), including antipodal
  // pairs shrinking toward the origin to catch point singularities.
  rep.max_dini_ratio = Scalar(0);
  for (int i = 0; i < plan.n_space_pairs; ++i) {
    const Scalar t = Scalar(plan.t_max * nf.uniform(5, std::uint32_t(i), 0));
    VectorX<Scalar> x = draw_x(6, std::uint32_t(i)), y(d);
    if (i % 4 == 0) {
      const Scalar r = std::pow(Scalar(10), Scalar(-4 * nf.uniform(7, std::uint32_t(i), 0)));
      x = draw_x(8, std::uint32_t(i)).normalized() * r;
      y = -x;
    } else {
      const Scalar r = std::pow(Scalar(10), Scalar(-3 * nf.uniform(7, std::uint32_t(i), 1)));
      y = x + draw_x(9, std::uint32_t(i)).normalized() * r;
    }
    const Scalar den = phi((x - y).norm());
    if (den < Scalar(1e-300)) continue;
    const Scalar diff = (spec.drift_at(t, x, &base) - spec.drift_at(t, y, &base)).norm();
    rep.max_dini_ratio = std::max(rep.max_dini_ratio, diff / den);
  }
  rep.dini_pass = rep.max_dini_ratio <= Scalar(1) + Scalar(1e-6);
  return rep;
}

}  // namespace mvsde
