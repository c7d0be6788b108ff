#include "mvlab/pipeline/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "mvlab/core/errors.hpp"
#include "mvlab/core/random.hpp"
#include "mvlab/diffusion/guidance.hpp"
#include "mvlab/diffusion/sampler.hpp"
#include "mvlab/metrics/losses.hpp"
#include "mvlab/metrics/metrics.hpp"
#include "mvlab/world/bayes.hpp"

namespace mvlab {

std::map<std::string, double> compute_metrics(const ViewStack& terminal,
                                              const std::vector<RenderOutput>& final_renders,
                                              const WorldModel& world) {
  const ModeDistance md = mode_distance(terminal, world);
  const ViewStack rerender = to_data_channels(final_renders, terminal.channels());
  std::map<std::string, double> m;
  m["mode_distance"] = md.distance;
  m["mode_id"] = md.id;
  m["cross_view_consistency"] = l1_rgbad(rerender, terminal, LossWeights{});
  m["mdd"] = mdd(final_renders);
  return m;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ViewStack leading_views(const ViewStack& x, int n) {
  if (n >= x.views()) return x;
  ViewStack out(n, x.channels(), x.height(), x.width());
  for (int v = 0; v < n; ++v) std::copy(x.view(v).begin(), x.view(v).end(), out.view(v).begin());
  return out;
}

// Reconstruct-and-render bookkeeping shared by io_sync and adapter runs.
class Reconstructor {
 public:
  Reconstructor(const PipelineConfig& cfg, const WorldModel& world)
      : cfg_(cfg), world_(world), state_(initial_state(world, cfg.volume_resolution)) {}

  // Fits the active views of `views` at step `step` and re-renders every camera.
  ReconResult step(const ViewStack& views, int step, RunReport& report) {
    const double fraction = static_cast<double>(step) / cfg_.steps;
    const int n = cfg_.active_views(fraction, world_.views());
    std::vector<Camera> cams(world_.cameras().begin(), world_.cameras().begin() + n);
    const int res = cfg_.fit.resolution_for(fraction);
    if (res > 0) cams = resize_cameras(cams, res, res);
    if (state_.phase == ReconPhase::kNerf && fraction >= cfg_.nerf_to_mesh_fraction) {
      state_ = switch_to_mesh(std::move(state_), cams, cfg_.fit);
      if (state_.phase == ReconPhase::kMesh) report.mesh_switch_step = step;
    }
    ReconResult r = reconstruct_and_render(std::move(state_), leading_views(views, n), cams,
                                           cfg_.fit, world_.cameras());
    state_ = r.state;
    report.step_fit_loss.push_back(state_.loss_trace.empty() ? kNaN : state_.loss_trace.back());
    report.feedback = r.feedback.views;
    return r;
  }

  ViewStack project(const ViewStack& views, int step, RunReport& report) {
    return to_data_channels(this->step(views, step, report).renders, world_.data_channels());
  }

  const ReconState& state() const { return state_; }

 private:
  const PipelineConfig& cfg_;
  const WorldModel& world_;
  ReconState state_;
};

ViewStack initial_latent(const PipelineConfig& cfg, const WorldModel& world,
                         const NoiseSchedule& sched, double t_start) {
  Rng rng(derive_seed(cfg.seed, 0));
  const ViewStack eps =
      gaussian_like(world.views(), world.data_channels(), world.height(), world.width(), rng);
  ViewStack x_bar(eps.views(), eps.channels(), eps.height(), eps.width());
  switch (cfg.init) {
    case InitMode::kNoise:
      break;
    case InitMode::kMeanLatent:
      x_bar = world.mean_data();
      break;
    case InitMode::kSdedit:
      x_bar = world.data(cfg.init_template >= 0 ? cfg.init_template : world.prototypes().front().id);
      break;
  }
  return mean_latent_init(x_bar, t_start, eps, sched, cfg.seed).x;
}

RunReport run_checked(const PipelineConfig& cfg, const WorldModel& world) {
  cfg.validate();
  const NoiseSchedule sched = NoiseSchedule::variance_preserving();
  const std::vector<double> times = sched.time_grid(cfg.steps, cfg.t_init * sched.terminal_time());
  const bool has_cond = !cfg.condition.empty();

  RunReport report;
  report.config_id = cfg.id;
  report.config_hash = config_hash(cfg);
  report.seed = cfg.seed;

  Reconstructor recon(cfg, world);
  const bool io_sync = cfg.mode == PipelineMode::kIoSync;
  const bool input_sync = io_sync && cfg.sync_point == SyncPoint::kInput;
  const bool adapter = cfg.mode == PipelineMode::kAdapter && cfg.guidance.lambda_aug > 0.0;

  ViewStack x = initial_latent(cfg, world, sched, times.front());
  if (io_sync && !input_sync && cfg.sync_init) x = recon.project(x, 0, report);
  const ViewStack zero_noise(x.views(), x.channels(), x.height(), x.width());
  const FeedbackPacket zero_fb = FeedbackPacket::zero(world.views(), world.height(), world.width());

  for (int i = 0; i < cfg.steps; ++i) {
    const double t = times[i];
    const ViewStack x_in = input_sync ? recon.project(x, i, report) : x;
    const ViewStack d_cond = bayes_denoise(x_in, t, sched, world, cfg.scope, cfg.condition);
    const ViewStack d_uncond =
        has_cond ? bayes_denoise(x_in, t, sched, world, cfg.scope) : d_cond;
    ViewStack x_hat = cfg_combine(d_cond, d_uncond, cfg.guidance.lambda_c);

    if (io_sync && !input_sync) {
      x_hat = recon.project(x_hat, i, report);
    } else if (adapter) {
      const ReconResult r = recon.step(x_hat, i, report);
      const ViewStack d_fb = bayes_denoise_augmented(x, t, sched, world, r.feedback,
                                                     cfg.feedback_rho, cfg.condition);
      const ViewStack d_zero = bayes_denoise_augmented(x, t, sched, world, zero_fb,
                                                       cfg.feedback_rho, cfg.condition);
      x_hat = guided_feedback_combine(d_fb, d_zero, d_cond, d_uncond, cfg.guidance);
    }

    ViewStack noise = zero_noise;
    if (!cfg.deterministic) {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i) + 1));
      noise = gaussian_like(x, rng);
    }
    x = euler_ancestral_step({x, t, cfg.seed}, x_hat, times[i + 1], noise, sched, cfg.deterministic).x;
    if (!x.all_finite()) throw NumericalError("sampler produced non-finite views at step " + std::to_string(i));
  }
  if (input_sync) x = recon.project(x, cfg.steps, report);
  report.terminal = x;

  // Two-stage reconstructs once from scratch; the coupled modes keep refining
  // the state they carried through sampling.
  const ReconState start =
      cfg.mode == PipelineMode::kTwoStage || !(io_sync || adapter)
          ? initial_state(world, cfg.volume_resolution)
          : recon.state();
  ReconResult fin =
      reconstruct_and_render(start, x, world.cameras(), cfg.final_fit(), world.cameras(), true);
  report.final_state = std::move(fin.state);
  report.final_renders = std::move(fin.renders);
  report.metrics = compute_metrics(report.terminal, report.final_renders, world);
  return report;
}

void require_mode(const PipelineConfig& cfg, PipelineMode m) {
  if (cfg.mode != m)
    throw DomainError("pipeline expects mode " + mode_name(m) + ", got " + mode_name(cfg.mode));
}

WorldModel world_for(const PipelineConfig& cfg) {
  cfg.validate();
  return make_world_preset(cfg.world, cfg.world_options);
}

}  // namespace

RunReport run_pipeline(const PipelineConfig& cfg, const WorldModel& world) {
  return run_checked(cfg, world);
}

RunReport sample_two_stage(const PipelineConfig& cfg) {
  require_mode(cfg, PipelineMode::kTwoStage);
  return run_checked(cfg, world_for(cfg));
}

RunReport sample_io_sync(const PipelineConfig& cfg) {
  require_mode(cfg, PipelineMode::kIoSync);
  return run_checked(cfg, world_for(cfg));
}

RunReport sample_adapter(const PipelineConfig& cfg) {
  require_mode(cfg, PipelineMode::kAdapter);
  return run_checked(cfg, world_for(cfg));
}

RunReport run_pipeline(const PipelineConfig& cfg) { return run_checked(cfg, world_for(cfg)); }

namespace {

nlohmann::ordered_json number(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string report_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["config_id"] = r.config_id;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  if (!r.error.empty()) j["error"] = r.error;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = number(v);
  j["metrics"] = metrics;
  nlohmann::ordered_json trace = nlohmann::ordered_json::array();
  for (double v : r.step_fit_loss) trace.push_back(number(v));
  j["step_fit_loss"] = trace;
  j["mesh_switch_step"] = r.mesh_switch_step;
  j["terminal_shape"] = {r.terminal.views(), r.terminal.channels(), r.terminal.height(),
                         r.terminal.width()};
  return j.dump(2) + "\n";
}

SuiteResult run_suite(const std::vector<PipelineConfig>& configs, int n_seeds, int jobs,
                      const std::function<void(const RunReport&)>& on_done) {
  if (n_seeds < 1) throw DomainError("run_suite: n_seeds must be at least 1");
  if (jobs < 1) throw DomainError("run_suite: jobs must be at least 1");
  std::set<std::string> ids;
  for (const auto& c : configs) {
    if (!ids.insert(c.id).second) throw DomainError("run_suite: duplicate config id '" + c.id + "'");
    c.validate();
  }

  const std::size_t total = configs.size() * static_cast<std::size_t>(n_seeds);
  SuiteResult result;
  result.runs.resize(total);
  std::atomic<std::size_t> next{0};
  std::mutex done_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < total;) {
      PipelineConfig cfg = configs[i / n_seeds];
      cfg.seed += i % n_seeds;
      RunReport r;
      try {
        r = run_pipeline(cfg);
      } catch (const std::exception& e) {
        r = RunReport{};
        r.config_id = cfg.id;
        r.config_hash = config_hash(cfg);
        r.seed = cfg.seed;
        r.error = e.what();
      }
      result.runs[i] = std::move(r);
      if (on_done) {
        std::lock_guard<std::mutex> lock(done_mutex);
        on_done(result.runs[i]);
      }
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(jobs, total));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t c = 0; c < configs.size(); ++c) {
    SuiteRow row;
    row.config_id = configs[c].id;
    std::map<std::string, std::vector<double>> values;
    for (int k = 0; k < n_seeds; ++k) {
      const RunReport& r = result.runs[c * n_seeds + k];
      ++row.runs;
      if (!r.error.empty()) {
        ++row.failures;
        continue;
      }
      for (const auto& [name, v] : r.metrics) values[name].push_back(v);
    }
    for (const auto& [name, v] : values) {
      row.median[name] = median(v);
      row.iqr[name] = iqr(v);
    }
    result.rows.push_back(std::move(row));
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const SuiteRow& a, const SuiteRow& b) { return a.config_id < b.config_id; });
  return result;
}

std::string suite_csv(const SuiteResult& result) {
  std::set<std::string> names;
  for (const auto& row : result.rows)
    for (const auto& [k, v] : row.median) names.insert(k);
  std::string out = "config_id,runs,failures";
  for (const auto& n : names) out += "," + n + "_median," + n + "_iqr";
  out += "\n";
  char buf[40];
  auto cell = [&](const std::map<std::string, double>& m, const std::string& k) {
    const auto it = m.find(k);
    if (it == m.end() || !std::isfinite(it->second)) return std::string("nan");
    std::snprintf(buf, sizeof buf, "%.17g", it->second);
    return std::string(buf);
  };
  for (const auto& row : result.rows) {
    out += row.config_id + "," + std::to_string(row.runs) + "," + std::to_string(row.failures);
    for (const auto& n : names) out += "," + cell(row.median, n) + "," + cell(row.iqr, n);
    out += "\n";
  }
  return out;
}

}  // namespace mvlab
