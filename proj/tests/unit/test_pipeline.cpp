#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "mvlab/core/errors.hpp"
#include "mvlab/metrics/metrics.hpp"
#include "mvlab/pipeline/config.hpp"
#include "mvlab/pipeline/pipeline.hpp"
#include "mvlab/world/presets.hpp"

using namespace mvlab;

namespace {

PipelineConfig small_quad(PipelineMode mode, std::uint64_t seed = 7) {
  PipelineConfig c;
  c.mode = mode;
  c.seed = seed;
  c.world = "bimodal-texture";
  c.world_options.resolution = 16;
  c.steps = 10;
  return c;
}

// Two copies of one prototype: a world with a single mode.
WorldModel single_mode_quad_world(double view_noise) {
  PresetOptions o;
  o.resolution = 16;
  const WorldModel base = make_world_preset("bimodal-texture", o);
  Prototype a = base.prototypes().front();
  Prototype b = a;
  a.id = 0;
  b.id = 1;
  a.prior = b.prior = 0.5;
  a.condition = b.condition = "";
  return WorldModel("single-quad", {a, b}, base.cameras(), view_noise);
}

bool bit_identical(const ViewStack& a, const ViewStack& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(PipelineConfig, EntriesRoundTrip) {
  PipelineConfig c;
  c.id = "B1";
  c.seed = 99;
  c.guidance.lambda_aug = 2.5;
  c.view_schedule = {{0.0, 4}, {0.5, 2}};
  c.fit.resolution_schedule = {{0.0, 16}, {0.4, 32}};
  PipelineConfig d;
  for (const auto& [k, v] : config_entries(c)) apply_config_value(d, k, v);
  EXPECT_EQ(config_json(c), config_json(d));
  EXPECT_EQ(config_hash(c), config_hash(d));
  EXPECT_EQ(config_hash(c).size(), 64u);
}

TEST(PipelineConfig, HashTracksEveryField) {
  const PipelineConfig c;
  for (const auto& [k, v] : config_entries(c)) {
    PipelineConfig d;
    const std::string alt = k == "mode" ? "io_sync" : k == "sampler.scope" ? "joint"
                          : k == "sampler.init" ? "sdedit" : k == "reconstruct.sync_point" ? "input"
                          : (v == "true" || v == "false") ? (v == "true" ? "false" : "true")
                          : k == "reconstruct.view_schedule" || k == "fit.resolution_schedule" ? "0:2"
                          : k == "id" || k == "condition" || k == "world.preset" ? v + "x"
                          : "3";
    if (alt == v) continue;
    apply_config_value(d, k, alt);
    EXPECT_NE(config_hash(c), config_hash(d)) << k;
  }
}

TEST(PipelineConfig, RejectsBadInput) {
  PipelineConfig c;
  EXPECT_THROW(apply_config_value(c, "guidance.lambda_zz", "1"), LookupError);
  EXPECT_THROW(apply_config_value(c, "sampler.steps", "ten"), DomainError);
  EXPECT_THROW(apply_config_value(c, "sampler.steps", "3.5"), DomainError);
  EXPECT_THROW(apply_config_value(c, "mode", "sideways"), DomainError);
  EXPECT_THROW(apply_config_value(c, "seed", "-1"), DomainError);
  apply_config_value(c, "guidance.lambda_aug", "-1");
  try {
    c.validate();
    FAIL() << "negative lambda_aug accepted";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("guidance.lambda_aug"), std::string::npos);
  }
}

TEST(PipelineConfig, ViewScheduleAndFinalFit) {
  PipelineConfig c;
  EXPECT_EQ(c.active_views(0.9, 4), 4);
  c.view_schedule = {{0.0, 4}, {0.5, 2}};
  EXPECT_EQ(c.active_views(0.49, 4), 4);
  EXPECT_EQ(c.active_views(0.5, 4), 2);
  c.view_schedule = {{0.0, 9}};
  EXPECT_EQ(c.active_views(0.0, 4), 4);
  c.fit.resolution_schedule = {{0.0, 8}};
  const FitConfig f = c.final_fit();
  EXPECT_EQ(f.steps_per_denoise, c.final_steps);
  EXPECT_EQ(f.lift_refine_steps, c.final_lift_refine_steps);
  EXPECT_TRUE(f.resolution_schedule.empty());
}

TEST(Pipeline, ModePreconditions) {
  EXPECT_THROW(sample_adapter(small_quad(PipelineMode::kTwoStage)), DomainError);
  EXPECT_THROW(sample_io_sync(small_quad(PipelineMode::kAdapter)), DomainError);
  EXPECT_THROW(sample_two_stage(small_quad(PipelineMode::kIoSync)), DomainError);
}

TEST(Pipeline, SeedDeterminism) {
  for (bool det : {false, true}) {
    PipelineConfig c = small_quad(PipelineMode::kAdapter);
    c.deterministic = det;
    const RunReport a = run_pipeline(c);
    const RunReport b = run_pipeline(c);
    EXPECT_TRUE(bit_identical(a.terminal, b.terminal));
    EXPECT_EQ(report_json(a), report_json(b));
  }
  PipelineConfig c = small_quad(PipelineMode::kTwoStage);
  const RunReport a = run_pipeline(c);
  c.seed += 1;
  EXPECT_FALSE(bit_identical(a.terminal, run_pipeline(c).terminal));
}

TEST(Pipeline, ZeroAugmentationMatchesTwoStage) {
  for (bool det : {true, false}) {
    PipelineConfig c = small_quad(PipelineMode::kAdapter);
    c.deterministic = det;
    c.guidance.lambda_aug = 0.0;
    const RunReport ad = run_pipeline(c);
    c.mode = PipelineMode::kTwoStage;
    const RunReport two = run_pipeline(c);
    EXPECT_TRUE(bit_identical(ad.terminal, two.terminal));
  }
}

TEST(Pipeline, SingleModeIoSyncMatchesTwoStage) {
  const WorldModel world = single_mode_quad_world(0.0);
  PipelineConfig c = small_quad(PipelineMode::kTwoStage);
  const RunReport two = run_pipeline(c, world);
  c.mode = PipelineMode::kIoSync;
  const RunReport io = run_pipeline(c, world);
  EXPECT_LT(max_abs_diff(two.terminal, io.terminal), 1e-12);
  EXPECT_LT(two.metrics.at("mode_distance"), 1e-12);
}

TEST(Pipeline, LinearSyncPlacementsAgree) {
  // With a single-mode world the posterior mean is affine in x_t and the
  // feed-forward texture solve is a linear projection, so syncing the input
  // and syncing the output plus the initial state give the same trajectory.
  const WorldModel world = single_mode_quad_world(0.1);
  PipelineConfig c = small_quad(PipelineMode::kIoSync);
  c.deterministic = true;
  c.steps = 30;
  c.sync_point = SyncPoint::kInput;
  const RunReport in = run_pipeline(c, world);
  c.sync_point = SyncPoint::kOutput;
  c.sync_init = true;
  const RunReport out = run_pipeline(c, world);
  EXPECT_LT(max_abs_diff(in.terminal, out.terminal), 1e-10);
  // The jitter term keeps the check away from the trivial constant trajectory.
  EXPECT_GT(max_abs_diff(in.terminal, world.data(0)), 1e-3);
}

TEST(Pipeline, JointScopeLandsOnPrototype) {
  PipelineConfig c;
  c.mode = PipelineMode::kTwoStage;
  c.seed = 3;
  c.world = "tetra-4";
  c.world_options.resolution = 16;
  c.scope = DenoiseScope::kJoint;
  c.steps = 20;
  c.final_steps = 0;
  const RunReport r = sample_two_stage(c);
  EXPECT_LT(r.metrics.at("mode_distance"), 1e-6);
}

TEST(Pipeline, SdeditKeepsTemplateAtLowNoise) {
  PipelineConfig c = small_quad(PipelineMode::kTwoStage);
  c.scope = DenoiseScope::kJoint;
  c.init = InitMode::kSdedit;
  c.t_init = 0.3;
  for (int id : {0, 1}) {
    c.init_template = id;
    const RunReport r = run_pipeline(c);
    EXPECT_EQ(r.metrics.at("mode_id"), id);
    EXPECT_LT(r.metrics.at("mode_distance"), 1e-6);
  }
}

TEST(Pipeline, MeshSwitchAtConfiguredFraction) {
  PipelineConfig c;
  c.mode = PipelineMode::kIoSync;
  c.seed = 1;
  c.world = "tetra-4";
  c.world_options.resolution = 16;
  c.scope = DenoiseScope::kJoint;
  c.steps = 10;
  c.volume_resolution = 8;
  c.fit.steps_per_denoise = 30;
  c.final_steps = 4;
  c.nerf_to_mesh_fraction = 0.6;
  const RunReport r = run_pipeline(c);
  EXPECT_EQ(r.mesh_switch_step, 6);
  EXPECT_EQ(r.final_state.phase, ReconPhase::kMesh);
  EXPECT_EQ(r.step_fit_loss.size(), 10u);
}

TEST(Pipeline, MetricsRecomputableFromArtifacts) {
  PipelineConfig c = small_quad(PipelineMode::kAdapter);
  const RunReport r = run_pipeline(c);
  const WorldModel world = make_world_preset(c.world, c.world_options);
  EXPECT_EQ(compute_metrics(r.terminal, r.final_renders, world), r.metrics);
  for (const char* k : {"mode_distance", "mode_id", "cross_view_consistency", "mdd"})
    EXPECT_TRUE(r.metrics.count(k)) << k;
}

TEST(Suite, SingleSeedEqualsRun) {
  const PipelineConfig c = small_quad(PipelineMode::kIoSync);
  const SuiteResult s = run_suite({c}, 1);
  const RunReport r = run_pipeline(c);
  ASSERT_EQ(s.rows.size(), 1u);
  for (const auto& [k, v] : r.metrics) {
    EXPECT_EQ(s.rows[0].median.at(k), v) << k;
    EXPECT_EQ(s.rows[0].iqr.at(k), 0.0) << k;
  }
}

TEST(Suite, KeyedRowsIgnoreOrderAndJobs) {
  PipelineConfig a = small_quad(PipelineMode::kTwoStage);
  a.id = "A0";
  PipelineConfig b = small_quad(PipelineMode::kAdapter);
  b.id = "B0";
  PipelineConfig bad = small_quad(PipelineMode::kAdapter);
  bad.id = "X";
  bad.condition = "no-such-tag";
  const SuiteResult s1 = run_suite({a, b, bad}, 2, 1);
  const SuiteResult s2 = run_suite({bad, b, a}, 2, 3);
  EXPECT_EQ(suite_csv(s1), suite_csv(s2));
  ASSERT_EQ(s1.rows.size(), 3u);
  EXPECT_EQ(s1.rows[0].config_id, "A0");
  EXPECT_EQ(s1.rows[2].failures, 2);
  EXPECT_EQ(s1.rows[0].failures, 0);
  EXPECT_FALSE(s1.runs[4].error.empty());
  EXPECT_THROW(run_suite({a, a}, 1), DomainError);
}
