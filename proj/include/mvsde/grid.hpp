#pragma once

#include <cmath>
#include <stdexcept>

namespace mvsde {

/// Uniform time grid on [t_start, t_end] with n_steps cells.
/// Node k is t_start + k*dt; node n_steps is t_end up to one ulp.
class TimeGrid {
 public:
  TimeGrid(double t_start, double t_end, int n_steps)
      : t_start_(t_start), t_end_(t_end), n_steps_(n_steps) {
    if (!(t_start >= 0.0) || !std::isfinite(t_start) || !std::isfinite(t_end))
      throw std::invalid_argument("TimeGrid: times must be finite, t_start >= 0");
    if (!(t_start < t_end)) throw std::invalid_argument("TimeGrid: t_start < t_end required");
    if (n_steps < 1) throw std::invalid_argument("TimeGrid: n_steps >= 1 required");
  }

  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  int n_steps() const { return n_steps_; }
  int n_nodes() const { return n_steps_ + 1; }
  double dt() const { return (t_end_ - t_start_) / n_steps_; }
  double node(int k) const { return t_start_ + k * dt(); }

  /// Index of the node closest to t; throws if t is not a node.
  int node_index(double t) const {
    const double k = (t - t_start_) / dt();
    const int ki = static_cast<int>(std::llround(k));
    if (ki < 0 || ki > n_steps_ || std::abs(k - ki) > 1e-9 * (n_steps_ + 1))
      throw std::invalid_argument("TimeGrid: time is not a grid node");
    return ki;
  }

  TimeGrid refined(int factor) const { return TimeGrid(t_start_, t_end_, n_steps_ * factor); }

  bool operator==(const TimeGrid& o) const {
    return t_start_ == o.t_start_ && t_end_ == o.t_end_ && n_steps_ == o.n_steps_;
  }

 private:
  double t_start_, t_end_;
  int n_steps_;
};

}  // namespace mvsde
