#include "mvlab/world/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvlab/core/errors.hpp"

namespace mvlab {

FeedbackPacket FeedbackPacket::zero(int views, int height, int width) {
  return {ViewStack(views, channels::kRgbd, height, width), FeedbackSource::kZero};
}

void FeedbackPacket::validate() const {
  if (views.channels() != channels::kRgbd)
    throw StructuralError("feedback packet must carry rgb+depth channels");
  if (!views.all_finite()) throw DomainError("feedback packet has non-finite values");
  if (source == FeedbackSource::kZero) {
    if (std::ranges::any_of(views.data(), [](double v) { return v != 0.0; }))
      throw DomainError("zero-source feedback packet must be all zeros");
    return;
  }
  for (int v = 0; v < views.views(); ++v)
    for (double d : views.plane(v, channels::kFeedbackDepth))
      if (d < 0.0) throw DomainError("feedback depth must be non-negative");
}

namespace {

void check_inputs(const ViewStack& x_t, const WorldModel& world) {
  if (x_t.views() != world.views() || x_t.channels() != world.data_channels() ||
      x_t.height() != world.height() || x_t.width() != world.width())
    throw StructuralError("x_t does not match the world's view layout");
  if (!x_t.all_finite()) throw DomainError("x_t has non-finite values");
}

double noise_variance(double t, const NoiseSchedule& sched, const WorldModel& world) {
  const double a = sched.alpha(t), s = sched.sigma(t), nu = world.view_noise();
  return a * a * nu * nu + s * s;
}

// Sum of squared residuals |x - alpha y|^2 over one view (or all views when view < 0).
double residual(const ViewStack& x, const ViewStack& y, double alpha, int view) {
  const auto xs = view < 0 ? x.data() : x.view(view);
  const auto ys = view < 0 ? y.data() : y.view(view);
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - alpha * ys[i];
    acc += d * d;
  }
  return acc;
}

// Log feedback likelihood per prototype, or empty for zero-source packets.
std::vector<double> feedback_log_terms(const FeedbackPacket& fb, const WorldModel& world,
                                       double rho) {
  fb.validate();
  if (fb.source == FeedbackSource::kZero) return {};
  if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("rho must be positive and finite");
  const ViewStack& f = fb.views;
  if (f.views() != world.views() || f.height() != world.height() || f.width() != world.width())
    throw StructuralError("feedback packet does not match the world's view layout");
  std::vector<double> out(world.size());
  const double scale = 2.0 * rho * rho * static_cast<double>(f.size());
  for (int k = 0; k < world.size(); ++k)
    out[k] = -residual(f, world.feedback_target(world.prototypes()[k].id), 1.0, -1) / scale;
  return out;
}

std::vector<double> normalize_log(std::vector<double> logw) {
  const double m = *std::ranges::max_element(logw);
  double total = 0.0;
  for (double& l : logw) {
    l = std::isinf(l) ? 0.0 : std::exp(l - m);
    total += l;
  }
  for (double& l : logw) l /= total;
  return logw;
}

std::vector<double> weights_impl(const ViewStack& x_t, double t, const NoiseSchedule& sched,
                                 const WorldModel& world, const std::vector<double>& fb_terms,
                                 std::string_view condition, int view) {
  const std::vector<double> prior = world.priors(condition);
  const double a = sched.alpha(t);
  const double var = noise_variance(t, sched, world);
  if (!(var > 0.0)) throw DomainError("posterior weights need sigma_t > 0 or view noise > 0");
  std::vector<double> logw(world.size());
  for (int k = 0; k < world.size(); ++k) {
    if (prior[k] <= 0.0) {
      logw[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    logw[k] = std::log(prior[k]) - residual(x_t, world.data(world.prototypes()[k].id), a, view) /
                                       (2.0 * var);
    if (!fb_terms.empty()) logw[k] += fb_terms[k];
  }
  return normalize_log(std::move(logw));
}

// Writes sum_k w_k (y_k + c (x_t - alpha y_k)) into view v of out (all views when v < 0).
void mix_into(ViewStack& out, const ViewStack& x_t, double t, const NoiseSchedule& sched,
              const WorldModel& world, const std::vector<double>& w, int v) {
  const double a = sched.alpha(t);
  const double c = a * world.view_noise() * world.view_noise() / noise_variance(t, sched, world);
  auto dst = v < 0 ? out.data() : out.view(v);
  const auto xs = v < 0 ? x_t.data() : x_t.view(v);
  std::ranges::fill(dst, 0.0);
  for (int k = 0; k < world.size(); ++k) {
    if (w[k] == 0.0) continue;
    const ViewStack& y = world.data(world.prototypes()[k].id);
    const auto ys = v < 0 ? y.data() : y.view(v);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w[k] * (ys[i] + c * (xs[i] - a * ys[i]));
  }
}

}  // namespace

std::vector<double> posterior_weights(const ViewStack& x_t, double t, const NoiseSchedule& sched,
                                      const WorldModel& world, const FeedbackPacket* feedback,
                                      double rho, std::string_view condition, int view) {
  check_inputs(x_t, world);
  sched.check_time(t);
  if (view >= world.views()) throw LookupError("view index out of range");
  const std::vector<double> fb = feedback ? feedback_log_terms(*feedback, world, rho)
                                          : std::vector<double>{};
  return weights_impl(x_t, t, sched, world, fb, condition, view);
}

ViewStack bayes_denoise(const ViewStack& x_t, double t, const NoiseSchedule& sched,
                        const WorldModel& world, DenoiseScope scope, std::string_view condition) {
  check_inputs(x_t, world);
  sched.check_time(t);
  if (!(t > 0.0)) throw DomainError("bayes_denoise requires t > 0");
  ViewStack out(x_t.views(), x_t.channels(), x_t.height(), x_t.width());
  if (scope == DenoiseScope::kJoint) {
    mix_into(out, x_t, t, sched, world, weights_impl(x_t, t, sched, world, {}, condition, -1), -1);
    return out;
  }
  for (int v = 0; v < world.views(); ++v)
    mix_into(out, x_t, t, sched, world, weights_impl(x_t, t, sched, world, {}, condition, v), v);
  return out;
}

ViewStack bayes_denoise_augmented(const ViewStack& x_t, double t, const NoiseSchedule& sched,
                                  const WorldModel& world, const FeedbackPacket& feedback,
                                  double rho, std::string_view condition) {
  check_inputs(x_t, world);
  sched.check_time(t);
  if (!(t > 0.0)) throw DomainError("bayes_denoise_augmented requires t > 0");
  const std::vector<double> fb = feedback_log_terms(feedback, world, rho);
  ViewStack out(x_t.views(), x_t.channels(), x_t.height(), x_t.width());
  for (int v = 0; v < world.views(); ++v)
    mix_into(out, x_t, t, sched, world, weights_impl(x_t, t, sched, world, fb, condition, v), v);
  return out;
}

}  // namespace mvlab
