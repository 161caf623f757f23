#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "mvsde/ensemble.hpp"
#include "mvsde/transport.hpp"

using namespace mvsde;

namespace {

Ensemble from_values(std::initializer_list<double> xs) {
  MatrixX<double> pts(Eigen::Index(xs.size()), 1);
  Eigen::Index i = 0;
  for (double v : xs) pts(i++, 0) = v;
  return Ensemble(pts);
}

double brute_force_two_point(const Ensemble& mu, const Ensemble& nu, double theta) {
  const auto c = [&](int i, int j) {
    return std::pow((mu.points().row(i) - nu.points().row(j)).norm(), theta);
  };
  const double straight = (c(0, 0) + c(1, 1)) / 2;
  const double crossed = (c(0, 1) + c(1, 0)) / 2;
  return std::pow(std::min(straight, crossed), 1.0 / theta);
}

}  // namespace

TEST_CASE("w_theta_1d") {
  VectorX<double> xs(2), ys(2);
  xs << 0, 2;
  ys << 1, 3;
  // oracle: enumeration over both pairings; monotone matching optimal
  CHECK(brute_force_two_point(from_values({0, 2}), from_values({1, 3}), 2.0) == doctest::Approx(1.0));
  CHECK(w_theta_1d(xs, ys, 2.0) == doctest::Approx(1.0).epsilon(1e-14));

  CHECK(w_theta_1d(xs, xs, 2.0) == 0.0);

  VectorX<double> zeros = VectorX<double>::Zero(16), fives = VectorX<double>::Constant(16, 5.0);
  for (double theta : {1.0, 2.0, 3.5})
    CHECK(w_theta_1d(zeros, fives, theta) == doctest::Approx(5.0).epsilon(1e-13));

  VectorX<double> unsorted(2);
  unsorted << 2, 0;
  CHECK_THROWS(w_theta_1d(unsorted, ys, 2.0));
  VectorX<double> three(3);
  CHECK_THROWS(w_theta_1d(three, ys, 2.0));
}

TEST_CASE("w_theta_exact") {
  const auto mu = sample_gaussian_ensemble<double>(24, 2, VectorX<double>::Zero(2), 1.0, 31);
  const MatrixX<double> shuffled = mu.points().colwise().reverse();
  const auto [w0, plan0] = w_theta_exact(mu, Ensemble(shuffled), 2.0);
  CHECK(w0 == doctest::Approx(0.0).epsilon(1e-12));

  MatrixX<double> a(2, 2), b(2, 2);
  a << 0, 0, 1, 0;
  b << 0, 1, 1, 1;
  const auto [w1, plan1] = w_theta_exact(Ensemble(a), Ensemble(b), 2.0);
  CHECK(w1 == doctest::Approx(1.0).epsilon(1e-14));  // vertical matching
  CHECK(plan1.permutation(0) == 0);
  CHECK(plan1.permutation(1) == 1);

  // d = 1 cross-validation against the order-statistics solver
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = sample_gaussian_ensemble<double>(40, 1, VectorX<double>::Zero(1), 1.0, 100 + trial);
    const auto y = sample_gaussian_ensemble<double>(40, 1, VectorX<double>::Constant(1, 0.5), 2.0,
                                                    200 + trial);
    VectorX<double> xs = x.points().col(0), ys = y.points().col(0);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    CHECK(w_theta_exact(x, y, 2.0).first == doctest::Approx(w_theta_1d(xs, ys, 2.0)).epsilon(1e-12));
  }

  const auto big = sample_gaussian_ensemble<double>(300, 2, VectorX<double>::Zero(2), 1.0, 1);
  CHECK_THROWS_WITH_AS(w_theta_exact(big, big, 2.0),
                       doctest::Contains("use w_theta_sinkhorn"), std::invalid_argument);
  CHECK_THROWS(w_theta_exact(mu, sample_gaussian_ensemble<double>(10, 2, VectorX<double>::Zero(2), 1.0, 2),
                             2.0));
}

TEST_CASE("sinkhorn") {
  // identical inputs: epsilon-dependent bias, shrinking with epsilon
  const auto mu = sample_gaussian_ensemble<double>(16, 1, VectorX<double>::Zero(1), 1.0, 41);
  const double raw_coarse = w_theta_sinkhorn(mu, mu, 2.0, 1e-2);
  const double raw_fine = w_theta_sinkhorn(mu, mu, 2.0, 1e-3);
  CHECK(raw_fine <= raw_coarse + 1e-9);
  CHECK(raw_fine < 0.1);

  // 16-point 1-d instance within 1% of the exact solver
  const auto xs = sample_uniform_ensemble<double>(16, 1, VectorX<double>::Zero(1),
                                                  VectorX<double>::Ones(1), 42);
  const auto ys = sample_uniform_ensemble<double>(16, 1, VectorX<double>::Constant(1, 2.0),
                                                  VectorX<double>::Constant(1, 3.0), 43);
  VectorX<double> xv = xs.points().col(0), yv = ys.points().col(0);
  std::sort(xv.begin(), xv.end());
  std::sort(yv.begin(), yv.end());
  const double exact = w_theta_1d(xv, yv, 2.0);
  CHECK(w_theta_sinkhorn(xs, ys, 2.0, 1e-3) == doctest::Approx(exact).epsilon(0.01));

  // two-point instance from the exact example
  MatrixX<double> a(2, 2), b(2, 2);
  a << 0, 0, 1, 0;
  b << 0, 1, 1, 1;
  CHECK(w_theta_sinkhorn(Ensemble(a), Ensemble(b), 2.0, 1e-3) == doctest::Approx(1.0).epsilon(0.01));

  CHECK_THROWS(w_theta_sinkhorn(mu, mu, 2.0, -1.0));
  // non-convergence carries the violation
  try {
    w_theta_sinkhorn(xs, ys, 2.0, 1e-3, 1, 1e-15);
    CHECK(false);
  } catch (const SinkhornError& e) {
    CHECK(e.violation > 0.0);
  }
}

TEST_CASE("optimal initial pairing") {
  const auto mu = sample_gaussian_ensemble<double>(32, 1, VectorX<double>::Zero(1), 1.0, 51);
  const auto id_perm = optimal_initial_pairing(mu, mu, 2.0);
  for (Eigen::Index i = 0; i < 32; ++i) CHECK(id_perm(i) == i);

  // rank matching on the line agrees with the assignment optimum
  const auto nu = sample_gaussian_ensemble<double>(32, 1, VectorX<double>::Constant(1, 1.0), 1.5, 52);
  const auto perm = optimal_initial_pairing(mu, nu, 2.0);
  double avg_cost = 0;
  for (Eigen::Index i = 0; i < 32; ++i)
    avg_cost += std::pow(mu.points()(i, 0) - nu.points()(perm(i), 0), 2.0);
  avg_cost /= 32;
  const auto [w, plan] = w_theta_exact(mu, nu, 2.0);
  CHECK(avg_cost == doctest::Approx(plan.cost).epsilon(1e-12));
  CHECK(std::pow(avg_cost, 0.5) == doctest::Approx(w).epsilon(1e-12));
}

TEST_CASE("metric properties") {
  NormalField nf(61);
  // symmetry
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = sample_gaussian_ensemble<double>(24, 2, VectorX<double>::Zero(2), 1.0, 300 + trial);
    const auto b = sample_gaussian_ensemble<double>(24, 2, VectorX<double>::Ones(2), 1.4, 400 + trial);
    CHECK(std::abs(w_theta_exact(a, b, 2.0).first - w_theta_exact(b, a, 2.0).first) <= 1e-12);
    // monotone in theta (Jensen)
    CHECK(w_theta_exact(a, b, 1.0).first <= w_theta_exact(a, b, 2.0).first + 1e-12);
    // sinkhorn never undercuts the infimum
    CHECK(w_theta_sinkhorn(a, b, 2.0, 1e-2) >= w_theta_exact(a, b, 2.0).first - 1e-9);
  }

  // triangle inequality on random triples
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = sample_gaussian_ensemble<double>(32, 2, VectorX<double>::Zero(2), 1.0, 500 + trial);
    const auto b = sample_gaussian_ensemble<double>(32, 2, VectorX<double>::Constant(2, 0.7), 1.3,
                                                    600 + trial);
    const auto c = sample_gaussian_ensemble<double>(32, 2, VectorX<double>::Constant(2, -0.4), 0.8,
                                                    700 + trial);
    const double ab = w_theta_exact(a, b, 2.0).first;
    const double bc = w_theta_exact(b, c, 2.0).first;
    const double ac = w_theta_exact(a, c, 2.0).first;
    CHECK(ac <= ab + bc + 1e-9);
  }
}

TEST_CASE("empirical gaussian distance") {
  // W_2(N(0,1), N(1,1)) = 1; 2000 samples each
  const auto mu = sample_gaussian_ensemble<double>(2000, 1, VectorX<double>::Zero(1), 1.0, 71);
  const auto nu = sample_gaussian_ensemble<double>(2000, 1, VectorX<double>::Ones(1), 1.0, 72);
  const double w = w_theta_auto(mu, nu, 2.0);
  CHECK(w == doctest::Approx(1.0).epsilon(0.05));
}
