#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mvsde/zvonkin.hpp"

using namespace mvsde;

namespace {

VectorX<double> v1(double x) { return VectorX<double>::Constant(1, x); }

double unit_sigma(double, double) { return 1.0; }

double dini_drift(double, double x) {
  const double a = std::min(std::abs(x), 1.0);
  return 0.5 * (x < 0 ? -std::sqrt(a) : std::sqrt(a));
}

}  // namespace

TEST_CASE("backward pde solve") {
  SUBCASE("zero drift gives the zero solution exactly") {
    PdeLattice lat;
    lat.n_time = 50;
    lat.n_space = 60;
    const auto u = solve_backward_pde<double>([](double, double) { return 0.0; }, unit_sigma, 5.0, lat);
    for (double v : u.values) CHECK(v == 0.0);
    const auto gb = gradient_bounds(u);
    CHECK(gb.sum() == 0.0);
  }

  SUBCASE("constant drift matches the closed form to 1e-4") {
    const double c = 1.0, lambda = 10.0, T = 1.0;
    PdeLattice lat;
    lat.t_end = T;
    lat.n_time = 50000;
    lat.n_space = 100;
    const auto u = solve_backward_pde<double>([c](double, double) { return c; }, unit_sigma, lambda, lat);
    double worst = 0;
    for (std::size_t k = 0; k < u.times.size(); ++k) {
      const double exact = c / lambda * (1 - std::exp(lambda * (u.times[k] - T)));
      for (Eigen::Index j = 0; j < u.counts(0); ++j)
        worst = std::max(worst, std::abs(u.at(k, j) - exact));
    }
    CHECK(worst <= 1e-4);

    const auto gb = gradient_bounds(u);
    CHECK(gb.sup_u == doctest::Approx(c / lambda * (1 - std::exp(-lambda * T))).epsilon(1e-3));
    CHECK(gb.sup_grad <= 1e-9);
    CHECK(gb.sup_hess <= 1e-6);
    CHECK(u.values.back() == 0.0);  // u(T) = 0 on every column
  }

  SUBCASE("resolvent bound sup|u| <= ||b||_inf / lambda") {
    PdeLattice lat;
    lat.n_time = 2000;
    lat.n_space = 300;
    for (double lambda : {10.0, 100.0}) {
      const auto u = solve_backward_pde<double>(dini_drift, unit_sigma, lambda, lat);
      CHECK(gradient_bounds(u).sup_u <= 0.5 / lambda + 1e-12);
    }
  }

  SUBCASE("explicit scheme cross-validates the implicit one") {
    PdeLattice lat;
    lat.t_end = 0.5;
    lat.n_time = 4000;  // dt/dx^2 = 0.45 < 0.5
    lat.x_lo = -3.0;
    lat.x_hi = 3.0;
    lat.n_space = 360;
    const auto ui = solve_backward_pde<double>(dini_drift, unit_sigma, 5.0, lat);
    const auto ue =
        solve_backward_pde<double>(dini_drift, unit_sigma, 5.0, lat, PdeScheme::explicit_euler);
    double worst = 0;
    for (std::size_t i = 0; i < ui.values.size(); ++i)
      worst = std::max(worst, std::abs(ui.values[i] - ue.values[i]));
    CHECK(worst <= 2e-4);

    PdeLattice unstable = lat;
    unstable.n_time = 100;
    CHECK_THROWS(solve_backward_pde<double>(dini_drift, unit_sigma, 5.0, unstable,
                                            PdeScheme::explicit_euler));
  }
}

TEST_CASE("lambda threshold for the dini drift") {
  PdeLattice lat;
  lat.n_time = 1000;
  lat.n_space = 1200;
  const auto [lambda, gb] = lambda_threshold<double>(dini_drift, unit_sigma, lat, 0.2);
  CHECK(gb.sum() <= 0.2);
  CHECK(lambda >= 1.0);
  // the bound regime guarantees theta = id + u is a lattice diffeomorphism
  const auto u = solve_backward_pde<double>(dini_drift, unit_sigma, lambda, lat);
  CHECK(gradient_bounds(u).sup_grad < 1.0);
  CHECK(theta_strictly_increasing(u));
}

TEST_CASE("ito consistency") {
  SUBCASE("zero drift transforms trivially") {
    PdeLattice lat;
    lat.n_time = 100;
    lat.n_space = 100;
    const auto u = solve_backward_pde<double>([](double, double) { return 0.0; }, unit_sigma, 5.0, lat);
    auto spec = drift_zero_diffusion_identity<double>(1);
    const double rms =
        ito_consistency(u, 5.0, spec, Ensemble::dirac(v1(0.0), 64), TimeGrid(0.0, 1.0, 100), 3);
    CHECK(rms == 0.0);
  }

  SUBCASE("constant drift: rms shrinks under refinement") {
    const double c = 1.0, lambda = 10.0;
    PdeLattice lat;
    lat.n_time = 20000;
    lat.n_space = 100;
    const auto u = solve_backward_pde<double>([c](double, double) { return c; }, unit_sigma, lambda, lat);
    auto spec = drift_constant<double>(v1(c));
    const auto x0 = Ensemble::dirac(v1(0.0), 256);
    std::vector<double> rms;
    for (int n : {100, 400, 1600})
      rms.push_back(ito_consistency(u, lambda, spec, x0, TimeGrid(0.0, 1.0, n), 5));
    CHECK(rms[1] < rms[0]);
    CHECK(rms[2] < rms[1]);
    CHECK(rms[0] / rms[1] >= 1.5);  // noise terms cancel here, so decay is at least order 1/2
    CHECK(rms[1] / rms[2] >= 1.5);
  }

  SUBCASE("dini drift ladder: order-1/2 window and monotone decay") {
    PdeLattice lat;
    lat.n_time = 4000;
    lat.n_space = 2400;
    const auto [lambda, gb] = lambda_threshold<double>(dini_drift, unit_sigma, lat, 0.2);
    const auto u = solve_backward_pde<double>(dini_drift, unit_sigma, lambda, lat);
    auto spec = drift_dini_example<double>(0.5, 1);
    const auto x0 = Ensemble::dirac(v1(0.0), 512);

    std::vector<double> rms;
    for (int n : {250, 1000, 4000})  // 4x refinements
      rms.push_back(ito_consistency(u, lambda, spec, x0, TimeGrid(0.0, 1.0, n), 7));
    CHECK(rms[1] < rms[0]);
    CHECK(rms[2] < rms[1]);
    CHECK(rms[0] / rms[1] >= 1.5);
    CHECK(rms[0] / rms[1] <= 3.0);
    CHECK(rms[1] / rms[2] >= 1.5);
    CHECK(rms[1] / rms[2] <= 3.0);
  }
}
