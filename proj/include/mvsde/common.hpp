#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mvsde {

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using ConstVecRef = Eigen::Ref<const VectorX<Scalar>>;
template <class Scalar>
using VecRef = Eigen::Ref<VectorX<Scalar>>;
template <class Scalar>
using MatRef = Eigen::Ref<MatrixX<Scalar>>;

inline constexpr const char* kLibraryVersion = "0.1.0";

/// Monte Carlo scalar with its standard error.
template <class Scalar>
struct Estimate {
  Scalar value{};
  Scalar se{};
};

template <class Scalar>
Estimate<Scalar> mean_with_se(const VectorX<Scalar>& samples) {
  const auto n = samples.size();
  if (n == 0) throw std::invalid_argument("mean_with_se: empty sample");
  const Scalar m = samples.mean();
  if (n == 1) return {m, Scalar(0)};
  const Scalar var = (samples.array() - m).square().sum() / Scalar(n - 1);
  return {m, std::sqrt(var / Scalar(n))};
}

/// Deterministic chunked parallel loop: fn(begin, end) over [0, n).
/// Callers must write to disjoint slots; reductions happen after the join.
template <class Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    fn(std::int64_t(0), n);
    return;
  }
  const int used = static_cast<int>(std::min<std::int64_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(used);
  const std::int64_t chunk = (n + used - 1) / used;
  for (int t = 0; t < used; ++t) {
    const std::int64_t b = t * chunk;
    const std::int64_t e = std::min<std::int64_t>(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : pool) th.join();
}

/// FNV-1a, used for config fingerprints in reports.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace mvsde
