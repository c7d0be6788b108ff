#pragma once

#include <string>
#include <vector>

namespace mvlab {

enum class ScheduleKind { kVariancePreserving, kEdm };

// The (alpha_t, sigma_t) pair over continuous time t in [0, T].
//
// Variance-preserving: alpha = cos(theta), sigma = sin(theta), theta = atan(max_ratio) * t / T,
// so the signal never vanishes completely and sigma/alpha reaches max_ratio at t = T.
// EDM-style: alpha = 1, sigma = t, T = sigma_max.
class NoiseSchedule {
 public:
  static NoiseSchedule variance_preserving(double terminal_time = 1.0, double max_ratio = 80.0);
  static NoiseSchedule edm(double sigma_max = 80.0);

  ScheduleKind kind() const { return kind_; }
  double terminal_time() const { return terminal_time_; }

  double alpha(double t) const;
  double sigma(double t) const;
  // sigma / alpha, the noise level of the rescaled variable x_t / alpha_t.
  double ratio(double t) const;
  // Inverse of sigma(t) on [0, T].
  double time_for_sigma(double sigma) const;

  // Throws DomainError if t is outside [0, T] or not finite.
  void check_time(double t) const;

  // steps+1 times from t_start down to 0, uniformly spaced in sigma.
  std::vector<double> time_grid(int steps, double t_start) const;
  std::vector<double> time_grid(int steps) const { return time_grid(steps, terminal_time_); }

  std::string describe() const;

 private:
  NoiseSchedule(ScheduleKind kind, double terminal_time, double max_angle)
      : kind_(kind), terminal_time_(terminal_time), max_angle_(max_angle) {}

  ScheduleKind kind_;
  double terminal_time_;
  double max_angle_;
};

}  // namespace mvlab
