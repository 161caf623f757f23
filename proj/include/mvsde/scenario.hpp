#pragma once

#include <stdexcept>
#include <string>

#include "mvsde/coefficients.hpp"
#include "mvsde/common.hpp"
#include "mvsde/ensemble.hpp"
#include "mvsde/grid.hpp"
#include "mvsde/toml.hpp"

namespace mvsde {

/// Builders from the declarative scenario config. Every getter fills its
/// default into the table, so serializing the table afterwards yields the
/// resolved config (input plus defaults), re-runnable to identical results.

inline TimeGrid build_grid(TomlTable& t) {
  return TimeGrid(t.get_double("grid.t_start", 0.0), t.get_double("grid.t_end", 1.0),
                  int(t.get_int("grid.n_steps", 1000)));
}

inline Ensemble build_ensemble(TomlTable& t, const std::string& prefix, int d, Eigen::Index m,
                               std::uint64_t seed) {
  const std::string kind = t.get_string(prefix + ".kind", "dirac");
  auto vec = [&](const std::string& key, double fallback) {
    const auto a = t.get_double_array(prefix + "." + key, std::vector<double>(d, fallback));
    if (int(a.size()) != d)
      throw std::runtime_error("config: " + prefix + "." + key + " must have d entries");
    VectorX<double> v(d);
    for (int j = 0; j < d; ++j) v(j) = a[j];
    return v;
  };
  if (kind == "dirac") return Ensemble::dirac(vec("point", 0.0), m);
  if (kind == "gaussian")
    return sample_gaussian_ensemble<double>(m, d, vec("mean", 0.0), t.get_double(prefix + ".stddev", 1.0),
                                            seed);
  if (kind == "uniform") return sample_uniform_ensemble<double>(m, d, vec("lo", 0.0), vec("hi", 1.0), seed);
  throw std::runtime_error("config: unknown initial kind '" + kind + "'");
}

inline DiniModulus build_modulus(TomlTable& t, const std::string& prefix) {
  const std::string tag = t.get_string(prefix + ".family", "hoelder");
  const double c = t.get_double(prefix + ".c", 1.0);
  if (tag == "hoelder") return DiniModulus::hoelder(c, t.get_double(prefix + ".beta", 1.0));
  if (tag == "log_dini") return DiniModulus::log_dini(c, t.get_double(prefix + ".eps", 1.0));
  throw std::runtime_error("config: unknown modulus family '" + tag + "'");
}

inline CoefficientSpec build_coefficients(TomlTable& t, int d) {
  const std::string drift_tag = t.get_string("drift.tag", "zero");
  CoefficientSpec spec;
  if (drift_tag == "zero") {
    spec = drift_zero_diffusion_identity<double>(d);
  } else if (drift_tag == "constant") {
    const auto c = t.get_double_array("drift.c", std::vector<double>(d, 0.0));
    VectorX<double> cv(d);
    for (int j = 0; j < d; ++j) cv(j) = c.at(j);
    spec = drift_constant(cv);
  } else if (drift_tag == "affine_meanfield") {
    const auto c = t.get_double_array("drift.c", std::vector<double>(d, 0.0));
    VectorX<double> cv(d);
    for (int j = 0; j < d; ++j) cv(j) = c.at(j);
    spec = drift_affine_meanfield(t.get_double("drift.a", -1.0), t.get_double("drift.b", 1.0), cv);
  } else if (drift_tag == "singular") {
    spec = drift_singular(t.get_double("drift.alpha", 0.2), t.get_double("drift.beta", 0.5), d);
  } else if (drift_tag == "dini") {
    spec = drift_dini_example(t.get_double("drift.c", 0.5), d);
  } else if (drift_tag == "integral_type") {
    const std::string kernel = t.get_string("drift.kernel", "clamp");
    const double scale = t.get_double("drift.kernel_scale", 1.0);
    IntegralTypeSpec ispec;
    ispec.d = d;
    ispec.k = d;
    if (kernel == "clamp") {
      ispec.psi_b = [](double, ConstVecRef<double>, ConstVecRef<double> y) {
        return VectorX<double>(y.cwiseMax(-1.0).cwiseMin(1.0));
      };
      ispec.kernel_lipschitz = 1.0;
      ispec.kernel_bound = 1.0;
    } else if (kernel == "sin") {
      ispec.psi_b = [](double, ConstVecRef<double>, ConstVecRef<double> y) {
        return VectorX<double>(y.array().sin().matrix());
      };
      ispec.kernel_lipschitz = 1.0;
      ispec.kernel_bound = 1.0;
    } else {
      throw std::runtime_error("config: unknown integral-type kernel '" + kernel + "'");
    }
    ispec.psi_sigma = [d](double, ConstVecRef<double>, ConstVecRef<double>) {
      return VectorX<double>::Zero(d);
    };
    ispec.outer_b = [scale](double, ConstVecRef<double>, ConstVecRef<double> r) {
      return VectorX<double>(scale * r);
    };
    ispec.outer_sigma = [d](double, ConstVecRef<double>, ConstVecRef<double>) {
      return MatrixX<double>(MatrixX<double>::Identity(d, d));
    };
    spec = coefficients_from_integral_type(ispec);
    spec.L = scale;  // |B(r)-B(r')| <= scale |r - r'| and the kernel is 1-Lipschitz
  } else {
    throw std::runtime_error("config: unknown drift tag '" + drift_tag + "'");
  }

  const std::string diff_tag = t.get_string("diffusion.tag", "identity");
  if (diff_tag == "identity") {
    set_diffusion_scalar(spec, 1.0);
  } else if (diff_tag == "scalar") {
    set_diffusion_scalar(spec, t.get_double("diffusion.value", 1.0));
  } else if (diff_tag == "sin") {
    set_diffusion_sin(spec, t.get_double("diffusion.base", 1.0), t.get_double("diffusion.amp", 0.2));
  } else {
    throw std::runtime_error("config: unknown diffusion tag '" + diff_tag + "'");
  }
  if (t.contains("scenario.k_const")) spec.K = t.at("scenario.k_const").as_double();
  if (t.contains("scenario.l_const")) spec.L = t.at("scenario.l_const").as_double();
  spec.dim = d;
  return spec;
}

struct ScenarioCore {
  int d = 1;
  Eigen::Index m = 1000;
  double theta = 2.0;
  TimeGrid grid{0.0, 1.0, 100};
  CoefficientSpec coefficients;
};

inline ScenarioCore build_scenario(TomlTable& t) {
  ScenarioCore s;
  s.d = int(t.get_int("scenario.d", 1));
  s.m = Eigen::Index(t.get_int("scenario.m", 1000));
  s.theta = t.get_double("scenario.theta", 2.0);
  if (s.d < 1 || s.m < 1) throw std::runtime_error("config: need d >= 1 and m >= 1");
  s.grid = build_grid(t);
  s.coefficients = build_coefficients(t, s.d);
  return s;
}

}  // namespace mvsde
