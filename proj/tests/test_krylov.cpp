#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mvsde/krylov.hpp"
#include "mvsde/simulate.hpp"

using namespace mvsde;

namespace {

VectorX<double> v1(double x) { return VectorX<double>::Constant(1, x); }

GridField box_indicator(double support, double box = 50.0, int nodes = 5001) {
  return make_grid_field<double>({0.0}, v1(-box), v1(box), Eigen::VectorXi::Constant(1, nodes),
                                 [support](double, const VectorX<double>& x) {
                                   return std::abs(x(0)) <= support ? 1.0 : 0.0;
                                 });
}

GridField constant_field(double c) {
  return make_grid_field<double>({0.0}, v1(-50.0), v1(50.0), Eigen::VectorXi::Constant(1, 11),
                                 [c](double, const VectorX<double>&) { return c; });
}

PathBundle brownian_paths(Eigen::Index m, int n, std::uint64_t seed) {
  auto spec = drift_zero_diffusion_identity<double>(1);
  return euler_frozen(spec, nullptr, Ensemble::dirac(v1(0.0), m), TimeGrid(0.0, 1.0, n), seed);
}

// E int_0^1 1_{[-1,1]}(W_r) dr = int_0^1 erf(1/sqrt(2 r)) dr by Simpson
double bm_occupation_oracle() {
  const int n = 20000;
  auto g = [](double r) { return r <= 0.0 ? 1.0 : std::erf(1.0 / std::sqrt(2.0 * r)); };
  double acc = g(0.0) + g(1.0);
  for (int i = 1; i < n; ++i) acc += g(double(i) / n) * (i % 2 ? 4.0 : 2.0);
  return acc / (3.0 * n);
}

}  // namespace

TEST_CASE("occupation functional") {
  const auto paths = brownian_paths(4000, 512, 3);

  SUBCASE("constant one over the whole box integrates time") {
    const auto est = occupation_functional(paths, constant_field(1.0), 0.25, 0.75);
    CHECK(est.value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(est.se == doctest::Approx(0.0));
  }
  SUBCASE("zero field") {
    const auto est = occupation_functional(paths, constant_field(0.0), 0.0, 1.0);
    CHECK(est.value == 0.0);
  }
  SUBCASE("brownian occupation of [-1,1] matches the Gaussian-CDF oracle") {
    const auto big = brownian_paths(20000, 1000, 5);
    const auto est = occupation_functional(big, box_indicator(1.0), 0.0, 1.0);
    CHECK(est.value == doctest::Approx(bm_occupation_oracle()).epsilon(0.02));
  }
  SUBCASE("negative f rejected") {
    CHECK_THROWS(occupation_functional(paths, constant_field(-1.0), 0.0, 1.0));
  }
  SUBCASE("additive over adjacent intervals") {
    const auto f = box_indicator(1.0);
    const double whole = occupation_functional(paths, f, 0.0, 1.0).value;
    const double left = occupation_functional(paths, f, 0.0, 0.5).value;
    const double right = occupation_functional(paths, f, 0.5, 1.0).value;
    CHECK(left + right == doctest::Approx(whole).epsilon(1e-12));
  }
  SUBCASE("monotone in f") {
    const double small = occupation_functional(paths, box_indicator(1.0), 0.0, 1.0).value;
    const double large = occupation_functional(paths, box_indicator(2.0), 0.0, 1.0).value;
    CHECK(small <= large);
  }
}

TEST_CASE("krylov fit") {
  SUBCASE("constant field gives a pure power law") {
    const auto paths = brownian_paths(200, 512, 7);
    const auto fit = krylov_fit(paths, constant_field(1.0), 2.0, 4.0,
                                default_interval_ladder(paths.grid));
    CHECK(fit.delta_hat == doctest::Approx(1.0).epsilon(0.02));
    CHECK(fit.delta_positive);
    CHECK(fit.c_hat == doctest::Approx(1.0 / fit.lpq_norm_value).epsilon(1e-6));
  }
  SUBCASE("brownian indicator occupation is nearly linear on short intervals") {
    const auto paths = brownian_paths(8000, 1024, 9);
    const auto fit = krylov_fit(paths, box_indicator(1.0), 2.0, 4.0,
                                default_interval_ladder(paths.grid));
    CHECK(fit.delta_hat > 0.9);
    CHECK(fit.delta_hat <= 1.02);
  }
  SUBCASE("ladder validation") {
    const auto paths = brownian_paths(100, 64, 11);
    CHECK_THROWS(krylov_fit(paths, constant_field(1.0), 2.0, 4.0, {{0.0, 1.0}, {0.0, 0.5}}));
    CHECK_THROWS(krylov_fit(paths, constant_field(1.0), 1.0, 2.0,
                            default_interval_ladder(paths.grid)));  // (p,q) outside the class
  }
  SUBCASE("singular drift keeps a finite constant and positive exponent") {
    auto spec = drift_singular<double>(0.2, 0.5, 1);  // |b|^2 in L^q_p for p=2
    const auto paths = euler_frozen(spec, nullptr, Ensemble::dirac(v1(0.1), 4000),
                                    TimeGrid(0.0, 1.0, 1000), 13);
    const auto fit = krylov_fit(paths, box_indicator(1.0), 2.0, 4.0,
                                default_interval_ladder(paths.grid));
    CHECK(std::isfinite(fit.c_hat));
    CHECK(fit.c_hat > 0.0);
    CHECK(fit.delta_positive);
  }
}

TEST_CASE("khasminskii exponential") {
  const auto paths = brownian_paths(4000, 512, 17);

  SUBCASE("zero field gives exactly one") {
    const auto rep = khasminskii_exp(paths, constant_field(0.0), 1.0);
    CHECK(rep.exponential.value == 1.0);
    CHECK(rep.exponential.se == 0.0);
  }
  SUBCASE("constant field is deterministic") {
    const auto rep = khasminskii_exp(paths, constant_field(0.7), 1.3);
    CHECK(rep.exponential.value == doctest::Approx(std::exp(1.3 * 0.7)).epsilon(1e-12));
    CHECK(rep.delta_hat == doctest::Approx(1.0).epsilon(0.02));
    // moment chain: E (cT)^n = c^n against n! T^{delta n} ||f||^n envelopes
    for (int n = 0; n < 4; ++n) {
      CHECK(rep.moments[n] == doctest::Approx(std::pow(0.7, n + 1)).epsilon(1e-10));
      CHECK(rep.implied_c[n] > 0.0);
    }
  }
  SUBCASE("Jensen lower envelope") {
    const auto rep = khasminskii_exp(paths, box_indicator(1.0), 1.0);
    const auto occ = occupation_functional(paths, box_indicator(1.0), 0.0, 1.0);
    CHECK(rep.exponential.value >= std::exp(occ.value) - 3 * rep.exponential.se);
  }
  SUBCASE("overflow guarded") {
    CHECK_THROWS_AS(khasminskii_exp(paths, constant_field(1.0), 1e4), std::overflow_error);
  }
}

TEST_CASE("markov spot check") {
  auto spec = drift_zero_diffusion_identity<double>(1);
  const auto paths = euler_frozen(spec, nullptr, Ensemble::dirac(v1(0.0), 6000),
                                  TimeGrid(0.0, 1.0, 512), 19);
  const auto rep = markov_spot_check(spec, paths, box_indicator(1.0), 0.5, 1.0, 23, 3000);
  CHECK(std::abs(rep.z_score) <= 4.0);
}
