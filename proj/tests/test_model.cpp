#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "mvsde/ensemble.hpp"
#include "mvsde/io.hpp"
#include "mvsde/simulate.hpp"

using namespace mvsde;

TEST_CASE("pair class membership") {
  const int d = 3;
  CHECK(in_class_K(2.0 * d, 4.0, d));         // 1/2 + 1/2 = 1 < 2
  CHECK_FALSE(in_class_K(double(d), 2.0, d)); // 1 + 1 = 2, boundary
  CHECK(in_class_K(4.0 * d, 8.0, d, true));   // 1/4 + 1/4 = 1/2 < 1
  CHECK_THROWS(in_class_K(std::numeric_limits<double>::infinity(), 2.0, 1));
  CHECK_THROWS(in_class_K(1.0, 2.0, 1));

  // monotone: increasing p or q never flips true -> false
  NormalField nf(7);
  for (int i = 0; i < 200; ++i) {
    const double p = 1.01 + 10 * nf.uniform(0, i, 0);
    const double q = 1.01 + 10 * nf.uniform(0, i, 1);
    const int dd = 1 + int(6 * nf.uniform(0, i, 2));
    for (bool strict : {false, true}) {
      if (in_class_K(p, q, dd, strict)) {
        CHECK(in_class_K(p + 1.0, q, dd, strict));
        CHECK(in_class_K(p, q + 1.0, dd, strict));
      }
    }
  }
}

TEST_CASE("moment") {
  CHECK(moment(Ensemble::dirac(VectorX<double>::Zero(3), 1), 2.0) == 0.0);

  MatrixX<double> pts(2, 2);
  pts << 1, 0, 0, 1;
  CHECK(moment(Ensemble(pts), 2.0) == doctest::Approx(1.0));

  const auto gauss = sample_gaussian_ensemble<double>(10000, 1, VectorX<double>::Zero(1), 1.0, 99);
  CHECK(moment(gauss, 2.0) == doctest::Approx(1.0).epsilon(0.05));

  // degree-theta homogeneity
  NormalField nf(3);
  for (int i = 0; i < 20; ++i) {
    const double theta = 1.0 + 3 * nf.uniform(1, i, 0);
    const double c = 0.1 + 5 * nf.uniform(1, i, 1);
    const auto e = sample_gaussian_ensemble<double>(50, 2, VectorX<double>::Zero(2), 1.0, 1000 + i);
    CHECK(moment(Ensemble(MatrixX<double>(c * e.points())), theta) ==
          doctest::Approx(std::pow(c, theta) * moment(e, theta)).epsilon(1e-12));
  }

  CHECK_THROWS(moment(gauss, 0.5));
}

TEST_CASE("time grid") {
  TimeGrid g(0.25, 1.25, 8);
  CHECK(g.dt() == doctest::Approx(0.125));
  for (int k = 0; k <= 8; ++k) CHECK(g.node(k) == doctest::Approx(0.25 + 0.125 * k).epsilon(1e-15));
  CHECK(g.node_index(0.5) == 2);
  CHECK_THROWS(g.node_index(0.3));
  CHECK_THROWS(TimeGrid(1.0, 1.0, 4));
  CHECK_THROWS(TimeGrid(-0.5, 1.0, 4));
  CHECK_THROWS(TimeGrid(0.0, 1.0, 0));
  CHECK(g.refined(4).n_steps() == 32);
}

TEST_CASE("ensemble and flow invariants") {
  CHECK_THROWS(Ensemble(MatrixX<double>(0, 2)));
  MatrixX<double> bad(1, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(Ensemble(bad));

  TimeGrid g(0.0, 1.0, 2);
  const auto mu = Ensemble::dirac(VectorX<double>::Zero(1), 4);
  CHECK_THROWS(MeasureFlow(g, {mu, mu}));  // wrong length
  const auto mu2 = Ensemble::dirac(VectorX<double>::Zero(2), 4);
  CHECK_THROWS(MeasureFlow(g, {mu, mu, mu2}));  // mixed dims
  CHECK(MeasureFlow::constant(g, mu).at(2).size() == 4);
}

TEST_CASE("path bundle noise variance") {
  // M * n_steps = 2000 * 64 > 1e5 samples per coordinate
  auto spec = drift_zero_diffusion_identity<double>(2);
  const auto x0 = Ensemble::dirac(VectorX<double>::Zero(2), 2000);
  const auto paths = euler_frozen(spec, nullptr, x0, TimeGrid(0.0, 1.0, 64), 5);
  const auto ratio = paths.noise_variance_ratio();
  for (int j = 0; j < 2; ++j) {
    CHECK(ratio(j) > 0.9);
    CHECK(ratio(j) < 1.1);
  }
  CHECK(paths.initial() == x0.points());
}

TEST_CASE("flow modulus") {
  TimeGrid g(0.0, 1.0, 10);

  const auto mu = sample_gaussian_ensemble<double>(32, 1, VectorX<double>::Zero(1), 1.0, 11);
  const auto constant = MeasureFlow::constant(g, mu);
  CHECK(flow_modulus(constant, 2.0).cwiseAbs().maxCoeff() == 0.0);

  // deterministic unit drift: delta measures marching by dt per node
  std::vector<Ensemble> deltas;
  for (int k = 0; k <= 10; ++k)
    deltas.push_back(Ensemble::dirac(VectorX<double>::Constant(1, g.node(k)), 4));
  const auto marching = MeasureFlow(g, deltas);
  const auto mod = flow_modulus(marching, 2.0);
  for (int k = 0; k < 10; ++k) CHECK(mod(k) == doctest::Approx(g.dt()).epsilon(1e-12));

  // Brownian flow: entries on the sqrt(dt) scale and decreasing with dt
  auto spec = drift_zero_diffusion_identity<double>(1);
  const auto x0 = Ensemble::dirac(VectorX<double>::Zero(1), 2000);
  const auto coarse = particle_system(spec, x0, TimeGrid(0.0, 1.0, 25), 21).flow.value();
  const auto fine = particle_system(spec, x0, TimeGrid(0.0, 1.0, 100), 21).flow.value();
  const auto mc = flow_modulus(coarse, 2.0), mf = flow_modulus(fine, 2.0);
  CHECK(mc.maxCoeff() <= 1.5 * std::sqrt(1.0 / 25));
  CHECK(mf.maxCoeff() <= 1.5 * std::sqrt(1.0 / 100));
  CHECK(mf.mean() < mc.mean());
}

TEST_CASE("ensemble serialization") {
  const auto e = sample_gaussian_ensemble<double>(37, 3, VectorX<double>::Constant(3, 0.25), 2.0, 77);

  std::stringstream csv;
  ensemble_to_csv(e, csv);
  const auto back = ensemble_from_csv(csv);
  CHECK(back.size() == e.size());
  CHECK((back.points() - e.points()).cwiseAbs().maxCoeff() == 0.0);

  std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
  ensemble_to_binary(e, bin);
  const auto back2 = ensemble_from_binary(bin);
  CHECK(back2.points() == e.points());

  std::stringstream bad("XXXX");
  CHECK_THROWS(ensemble_from_binary(bad));
}

TEST_CASE("float instantiation smoke") {
  const auto e = sample_gaussian_ensemble<float>(100, 2, VectorX<float>::Zero(2), 1.0f, 5);
  CHECK(moment(e, 2.0f) > 0.5f);
  auto spec = drift_zero_diffusion_identity<float>(2);
  const auto paths = euler_frozen(spec, nullptr, e, TimeGrid(0.0, 0.5, 8), 5);
  CHECK(paths.terminal().allFinite());
}
