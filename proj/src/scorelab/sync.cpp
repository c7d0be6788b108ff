#include "mvlab/scorelab/sync.hpp"

#include <cmath>

#include "mvlab/core/errors.hpp"
#include "mvlab/core/random.hpp"
#include "mvlab/diffusion/sampler.hpp"

namespace mvlab::scorelab {

ViewStack apply_view_matrix(const Eigen::MatrixXd& sync, const ViewStack& x) {
  if (sync.rows() != sync.cols())
    throw StructuralError("sync matrix must be square");
  if (sync.rows() != x.views())
    throw StructuralError("sync matrix size does not match the number of views");
  const std::size_t n = x.view_size();
  ViewStack out(x.views(), x.channels(), x.height(), x.width());
  for (int v = 0; v < x.views(); ++v) {
    auto dst = out.view(v);
    for (int u = 0; u < x.views(); ++u) {
      const double w = sync(v, u);
      if (w == 0.0) continue;
      auto src = x.view(u);
      for (std::size_t i = 0; i < n; ++i) dst[i] += w * src[i];
    }
  }
  return out;
}

SyncPaths run_sync_paths(const SyncOperator& sync, const Denoiser& denoiser,
                         const ViewStack& x_init, const std::vector<double>& times,
                         const NoiseSchedule& sched) {
  if (times.size() < 2) throw DomainError("run_sync_paths: need at least one step");
  const ViewStack zero(x_init.views(), x_init.channels(), x_init.height(), x_init.width());

  DiffusionState a{x_init, times.front(), 0};
  DiffusionState b{sync(x_init), times.front(), 0};
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    a.x = sync(a.x);
    ViewStack a_hat = denoiser(a.x, a.t);
    a = euler_ancestral_step(a, a_hat, times[i + 1], zero, sched, true);

    ViewStack b_hat = sync(denoiser(b.x, b.t));
    b = euler_ancestral_step(b, b_hat, times[i + 1], zero, sched, true);
  }
  SyncPaths out{sync(a.x), b.x, 0.0};
  out.max_deviation = max_abs_diff(out.input_sync, out.output_sync);
  return out;
}

Eigen::MatrixXd uniform_averaging_matrix(int views) {
  return Eigen::MatrixXd::Constant(views, views, 1.0 / views);
}

double sync_equivalence_check(const Eigen::MatrixXd& sync_matrix, const SyncTrajectoryConfig& cfg,
                              const NoiseSchedule& sched) {
  if (sync_matrix.rows() != sync_matrix.cols()) throw StructuralError("sync matrix must be square");
  if (sync_matrix.rows() != cfg.views)
    throw StructuralError("sync matrix size does not match the configured view count");
  if (cfg.steps <= 0 || cfg.pixels <= 0) throw DomainError("sync_equivalence_check: bad config");

  Rng rng(cfg.seed);
  const int dim = cfg.views * cfg.pixels;
  Denoiser denoiser;
  if (cfg.denoiser == SyncDenoiserKind::kLinear) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim) * 0.6;
    Eigen::VectorXd bias(dim);
    for (int r = 0; r < dim; ++r) {
      bias(r) = 0.2 * standard_normal(rng);
      for (int c = 0; c < dim; ++c) m(r, c) += 0.2 * standard_normal(rng) / std::sqrt(dim);
    }
    denoiser = [m, bias](const ViewStack& x, double) {
      Eigen::Map<const Eigen::VectorXd> in(x.data().data(), static_cast<Eigen::Index>(x.size()));
      Eigen::VectorXd res = m * in + bias;
      ViewStack out(x.views(), x.channels(), x.height(), x.width());
      for (Eigen::Index i = 0; i < res.size(); ++i) out[static_cast<std::size_t>(i)] = res(i);
      return out;
    };
  } else {
    std::vector<Eigen::VectorXd> protos(2, Eigen::VectorXd(dim));
    for (auto& p : protos)
      for (int r = 0; r < dim; ++r) p(r) = standard_normal(rng);
    denoiser = [protos, sched](const ViewStack& x, double t) {
      Eigen::Map<const Eigen::VectorXd> in(x.data().data(), static_cast<Eigen::Index>(x.size()));
      const double a = sched.alpha(t);
      const double s2 = sched.sigma(t) * sched.sigma(t);
      const double l0 = -(in - a * protos[0]).squaredNorm() / (2 * s2);
      const double l1 = -(in - a * protos[1]).squaredNorm() / (2 * s2);
      const double mx = std::max(l0, l1);
      const double w0 = std::exp(l0 - mx);
      const double w1 = std::exp(l1 - mx);
      Eigen::VectorXd res = (w0 * protos[0] + w1 * protos[1]) / (w0 + w1);
      ViewStack out(x.views(), x.channels(), x.height(), x.width());
      for (Eigen::Index i = 0; i < res.size(); ++i) out[static_cast<std::size_t>(i)] = res(i);
      return out;
    };
  }

  ViewStack x_init(cfg.views, 1, 1, cfg.pixels);
  const double T = sched.terminal_time();
  for (double& v : x_init.data()) v = sched.sigma(T) * standard_normal(rng);

  const SyncOperator op = [&sync_matrix](const ViewStack& x) {
    return apply_view_matrix(sync_matrix, x);
  };
  return run_sync_paths(op, denoiser, x_init, sched.time_grid(cfg.steps), sched).max_deviation;
}

}  // namespace mvlab::scorelab
