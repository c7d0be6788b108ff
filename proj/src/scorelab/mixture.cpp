#include "mvlab/scorelab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mvlab/core/errors.hpp"

namespace mvlab::scorelab {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(var) - kLogSqrt2Pi;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

void GaussianMixture1D::validate() const {
  if (means.empty() || stds.size() != means.size() || weights.size() != means.size())
    throw StructuralError("GaussianMixture1D: means, stds and weights must be non-empty and equal length");
  double total = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (!(stds[i] > 0.0)) throw DomainError("GaussianMixture1D: stds must be positive");
    if (!(weights[i] >= 0.0)) throw DomainError("GaussianMixture1D: weights must be non-negative");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("GaussianMixture1D: weights must sum to 1");
}

GaussianMixture1D single_gaussian(double mean, double std) { return {{mean}, {std}, {1.0}}; }

double perturbed_log_density_1d(const GaussianMixture1D& m, double x, double t,
                                const NoiseSchedule& sched) {
  const double a = sched.alpha(t);
  const double s = sched.sigma(t);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> logs(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double var = a * a * m.stds[i] * m.stds[i] + s * s;
    logs[i] = std::log(m.weights[i]) + log_normal(x, a * m.means[i], var);
    best = std::max(best, logs[i]);
  }
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - best);
  return best + std::log(acc);
}

double perturbed_density_1d(const GaussianMixture1D& m, double x, double t,
                            const NoiseSchedule& sched) {
  return std::exp(perturbed_log_density_1d(m, x, t, sched));
}

double perturbed_score_1d(const GaussianMixture1D& m, double x, double t,
                          const NoiseSchedule& sched) {
  if (t < 0.0) throw DomainError("perturbed_score_1d: t must be >= 0");
  const double a = sched.alpha(t);
  const double s = sched.sigma(t);
  std::vector<double> logs(m.size());
  std::vector<double> grads(m.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double var = a * a * m.stds[i] * m.stds[i] + s * s;
    logs[i] = std::log(m.weights[i]) + log_normal(x, a * m.means[i], var);
    grads[i] = -(x - a * m.means[i]) / var;
    best = std::max(best, logs[i]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double w = std::exp(logs[i] - best);
    num += w * grads[i];
    den += w;
  }
  return num / den;
}

double density_1d(const GaussianMixture1D& m, double x) {
  double p = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    p += m.weights[i] * std::exp(log_normal(x, m.means[i], m.stds[i] * m.stds[i]));
  return p;
}

double interval_mass_1d(const GaussianMixture1D& m, double lo, double hi) {
  double mass = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    mass += m.weights[i] * (normal_cdf((hi - m.means[i]) / m.stds[i]) -
                            normal_cdf((lo - m.means[i]) / m.stds[i]));
  return mass;
}

GaussianMixture1D product_mixture_1d(const GaussianMixture1D& m1, const GaussianMixture1D& m2) {
  m1.validate();
  m2.validate();
  GaussianMixture1D out;
  std::vector<double> log_w;
  for (std::size_t i = 0; i < m1.size(); ++i) {
    for (std::size_t j = 0; j < m2.size(); ++j) {
      const double v1 = m1.stds[i] * m1.stds[i];
      const double v2 = m2.stds[j] * m2.stds[j];
      const double var = 1.0 / (1.0 / v1 + 1.0 / v2);
      out.means.push_back(var * (m1.means[i] / v1 + m2.means[j] / v2));
      out.stds.push_back(std::sqrt(var));
      log_w.push_back(std::log(m1.weights[i]) + std::log(m2.weights[j]) +
                      log_normal(m1.means[i], m2.means[j], v1 + v2));
    }
  }
  const double best = *std::max_element(log_w.begin(), log_w.end());
  double total = 0.0;
  for (double& l : log_w) {
    l = std::exp(l - best);
    total += l;
  }
  for (double l : log_w) out.weights.push_back(l / total);
  return out;
}

}  // namespace mvlab::scorelab
