#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/diffusion/denoising_loss.hpp"
#include "mvlab/diffusion/schedule.hpp"

namespace mvlab::scorelab {

// Maps a view stack to its synchronized version (e.g. a cross-view matrix or a
// reconstruct-and-render operator).
using SyncOperator = std::function<ViewStack(const ViewStack&)>;

// Applies out_v = sum_u S(v, u) in_u at every pixel and channel.
ViewStack apply_view_matrix(const Eigen::MatrixXd& sync, const ViewStack& x);

struct SyncPaths {
  // Input sync: x_t <- S(x_t) before every denoiser call, read out as S(x_0).
  ViewStack input_sync;
  // Output sync plus synchronized initialization: x_init <- S(x_init), x_hat <- S(x_hat).
  ViewStack output_sync;
  double max_deviation = 0.0;
};

// Runs both placements with deterministic Euler steps over `times`.
SyncPaths run_sync_paths(const SyncOperator& sync, const Denoiser& denoiser,
                         const ViewStack& x_init, const std::vector<double>& times,
                         const NoiseSchedule& sched);

enum class SyncDenoiserKind {
  kLinear,        // x_hat = M x + b with a fixed random M and b
  kBayesMixture,  // exact posterior mean of a random two-point mixture (nonlinear)
};

struct SyncTrajectoryConfig {
  int views = 4;
  int pixels = 16;
  int steps = 30;
  std::uint64_t seed = 0;
  SyncDenoiserKind denoiser = SyncDenoiserKind::kLinear;
};

// Max abs deviation between the terminal states of the two placements. Equivalence
// is exact only for linear denoisers and idempotent sync matrices.
double sync_equivalence_check(const Eigen::MatrixXd& sync_matrix, const SyncTrajectoryConfig& cfg,
                              const NoiseSchedule& sched);

Eigen::MatrixXd uniform_averaging_matrix(int views);

}  // namespace mvlab::scorelab
