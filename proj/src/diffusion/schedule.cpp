#include "mvlab/diffusion/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvlab/core/errors.hpp"

namespace mvlab {

NoiseSchedule NoiseSchedule::variance_preserving(double terminal_time, double max_ratio) {
  if (!(terminal_time > 0.0) || !(max_ratio > 0.0))
    throw DomainError("variance_preserving: terminal time and max ratio must be positive");
  return NoiseSchedule(ScheduleKind::kVariancePreserving, terminal_time, std::atan(max_ratio));
}

NoiseSchedule NoiseSchedule::edm(double sigma_max) {
  if (!(sigma_max > 0.0)) throw DomainError("edm: sigma_max must be positive");
  return NoiseSchedule(ScheduleKind::kEdm, sigma_max, 0.0);
}

double NoiseSchedule::alpha(double t) const {
  if (kind_ == ScheduleKind::kEdm) return 1.0;
  return std::cos(max_angle_ * t / terminal_time_);
}

double NoiseSchedule::sigma(double t) const {
  if (kind_ == ScheduleKind::kEdm) return t;
  return std::sin(max_angle_ * t / terminal_time_);
}

double NoiseSchedule::ratio(double t) const { return sigma(t) / alpha(t); }

double NoiseSchedule::time_for_sigma(double s) const {
  if (kind_ == ScheduleKind::kEdm) return std::clamp(s, 0.0, terminal_time_);
  const double smax = sigma(terminal_time_);
  if (s >= smax) return terminal_time_;
  if (s <= 0.0) return 0.0;
  return std::asin(s) / max_angle_ * terminal_time_;
}

void NoiseSchedule::check_time(double t) const {
  if (!std::isfinite(t) || t < 0.0 || t > terminal_time_) {
    std::ostringstream msg;
    msg << "time " << t << " outside schedule domain [0, " << terminal_time_ << "]";
    throw DomainError(msg.str());
  }
}

std::vector<double> NoiseSchedule::time_grid(int steps, double t_start) const {
  if (steps < 1) throw DomainError("time_grid: steps must be >= 1");
  check_time(t_start);
  std::vector<double> ts(static_cast<std::size_t>(steps) + 1);
  const double s0 = sigma(t_start);
  ts.front() = t_start;
  for (int i = 1; i < steps; ++i)
    ts[i] = time_for_sigma(s0 * (1.0 - static_cast<double>(i) / steps));
  ts.back() = 0.0;
  return ts;
}

std::string NoiseSchedule::describe() const {
  std::ostringstream out;
  if (kind_ == ScheduleKind::kEdm)
    out << "edm(sigma_max=" << terminal_time_ << ")";
  else
    out << "vp(T=" << terminal_time_ << ", max_ratio=" << std::tan(max_angle_) << ")";
  return out.str();
}

}  // namespace mvlab
