#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mvlab/diffusion/guidance.hpp"
#include "mvlab/recon/fit.hpp"
#include "mvlab/world/bayes.hpp"
#include "mvlab/world/presets.hpp"

namespace mvlab {

enum class PipelineMode { kTwoStage, kIoSync, kAdapter };
enum class InitMode { kNoise, kMeanLatent, kSdedit };
// Where io_sync applies reconstruct-and-render: to the denoised output (the
// usual placement) or to the noisy input before each denoiser call.
enum class SyncPoint { kOutput, kInput };

struct PipelineConfig {
  std::string id = "run";
  PipelineMode mode = PipelineMode::kAdapter;
  std::uint64_t seed = 0;

  std::string world = "bimodal-splat";
  PresetOptions world_options;
  std::string condition;  // empty: unconditional

  int steps = 30;
  bool deterministic = false;
  DenoiseScope scope = DenoiseScope::kPerView;
  double t_init = 1.0;  // fraction of the terminal time
  InitMode init = InitMode::kNoise;
  int init_template = -1;  // SDEdit prototype id, -1 for the first prototype

  GuidanceConfig guidance;
  double feedback_rho = kDefaultFeedbackRho;

  FitConfig fit = default_step_fit();  // per denoising step
  // Budgets of the reconstruction after sampling; all other settings follow `fit`.
  int final_steps = 480;
  int final_lift_refine_steps = 40;
  int volume_resolution = 16;
  double nerf_to_mesh_fraction = 0.6;
  // (completed fraction, active view count) breakpoints; empty keeps all views.
  std::vector<std::pair<double, int>> view_schedule;
  SyncPoint sync_point = SyncPoint::kOutput;
  bool sync_init = false;  // output sync also projects the initial state

  static FitConfig default_step_fit() {
    FitConfig f;
    f.lift_refine_steps = 20;
    return f;
  }

  // Throws DomainError on invalid settings.
  void validate() const;
  FitConfig final_fit() const;
  // Active views for a completed fraction; world_views when the schedule is empty.
  int active_views(double fraction, int world_views) const;
};

std::string mode_name(PipelineMode m);
std::string init_name(InitMode m);

// Flat "section.key" -> value view of a config. Every key accepted by
// apply_config_value appears here, so the map is a complete, canonical form.
std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& cfg);

// Sets one field from its text form. Throws LookupError for an unknown key and
// DomainError for a malformed or out-of-range value.
void apply_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);

// Keys that a config file must set explicitly.
const std::vector<std::string>& required_config_keys();

// Canonical JSON object of config_entries, in key order.
std::string config_json(const PipelineConfig& cfg);
// SHA-256 of config_json.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace mvlab
