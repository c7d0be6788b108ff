#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/pipeline/config.hpp"
#include "mvlab/recon/reconstruct.hpp"
#include "mvlab/world/world_model.hpp"

namespace mvlab {

struct RunReport {
  std::string config_id;
  std::string config_hash;
  std::uint64_t seed = 0;

  ViewStack terminal;                      // data channels
  ReconState final_state;
  std::vector<RenderOutput> final_renders;  // with per-pixel contributions
  ViewStack feedback;                       // RGBD of the last per-step reconstruction, if any

  std::map<std::string, double> metrics;
  std::vector<double> step_fit_loss;  // last fit loss per denoising step, NaN without a fit
  int mesh_switch_step = -1;
  std::string error;  // set by run_suite when the run threw
};

// mode_distance, mode_id, cross_view_consistency (l1_rgbad of the final
// re-render against the terminal views) and mdd of the final renders.
std::map<std::string, double> compute_metrics(const ViewStack& terminal,
                                              const std::vector<RenderOutput>& final_renders,
                                              const WorldModel& world);

// Each requires the matching cfg.mode and throws DomainError otherwise.
RunReport sample_two_stage(const PipelineConfig& cfg);
RunReport sample_io_sync(const PipelineConfig& cfg);
RunReport sample_adapter(const PipelineConfig& cfg);
// Dispatches on cfg.mode.
RunReport run_pipeline(const PipelineConfig& cfg);
// Same on an explicit world; cfg.world is ignored.
RunReport run_pipeline(const PipelineConfig& cfg, const WorldModel& world);

std::string report_json(const RunReport& report);

struct SuiteRow {
  std::string config_id;
  int runs = 0;
  int failures = 0;
  std::map<std::string, double> median;
  std::map<std::string, double> iqr;
};

struct SuiteResult {
  // Runs in config order, seed index fastest.
  std::vector<RunReport> runs;
  // Sorted by config id.
  std::vector<SuiteRow> rows;
};

// Runs every config with seeds cfg.seed + k, k < n_seeds, on up to `jobs` threads.
// Paired configs share a base seed and therefore their noise. A run that throws
// is recorded with its error and excluded from the statistics. Results do not
// depend on `jobs`. `on_done` is called under a lock after each run.
SuiteResult run_suite(const std::vector<PipelineConfig>& configs, int n_seeds, int jobs = 1,
                      const std::function<void(const RunReport&)>& on_done = {});

// config_id,runs,failures,<metric>_median,<metric>_iqr... with %.17g numbers.
std::string suite_csv(const SuiteResult& result);

}  // namespace mvlab
