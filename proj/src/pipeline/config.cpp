#include "mvlab/pipeline/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "mvlab/core/errors.hpp"
#include "mvlab/core/hash.hpp"

namespace mvlab {

void PipelineConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw DomainError(key + ": " + what);
  };
  if (id.empty()) fail("id", "must not be empty");
  const auto names = world_preset_names();
  if (std::find(names.begin(), names.end(), world) == names.end())
    fail("world.preset", "unknown preset '" + world + "'");
  if (steps < 1) fail("sampler.steps", "must be at least 1");
  if (!(t_init > 0.0 && t_init <= 1.0)) fail("sampler.t_init", "must lie in (0, 1]");
  if (!(guidance.lambda_c >= 0.0)) fail("guidance.lambda_c", "must be non-negative");
  if (!(guidance.lambda_aug >= 0.0)) fail("guidance.lambda_aug", "must be non-negative");
  if (!(guidance.zero_feedback_prob >= 0.0 && guidance.zero_feedback_prob <= 1.0))
    fail("guidance.zero_feedback_prob", "must lie in [0, 1]");
  if (!(feedback_rho > 0.0) || !std::isfinite(feedback_rho))
    fail("guidance.feedback_rho", "must be positive");
  if (final_steps < 0) fail("reconstruct.final_steps", "must be non-negative");
  if (final_lift_refine_steps < 0) fail("reconstruct.final_lift_refine_steps", "must be non-negative");
  if (volume_resolution < 2) fail("reconstruct.volume_resolution", "must be at least 2");
  if (!(nerf_to_mesh_fraction >= 0.0 && nerf_to_mesh_fraction <= 1.0))
    fail("reconstruct.nerf_to_mesh_fraction", "must lie in [0, 1]");
  for (const auto& [f, n] : view_schedule)
    if (!(f >= 0.0 && f <= 1.0) || n < 1)
      fail("reconstruct.view_schedule", "needs fractions in [0, 1] and counts >= 1");
  try {
    fit.validate();
  } catch (const DomainError& e) {
    fail("fit", e.what());
  }
}

FitConfig PipelineConfig::final_fit() const {
  FitConfig f = fit;
  f.steps_per_denoise = final_steps;
  f.lift_refine_steps = final_lift_refine_steps;
  f.resolution_schedule.clear();
  return f;
}

int PipelineConfig::active_views(double fraction, int world_views) const {
  int n = world_views;
  for (const auto& [f, count] : view_schedule)
    if (fraction >= f) n = count;
  return std::clamp(n, 1, world_views);
}

std::string mode_name(PipelineMode m) {
  switch (m) {
    case PipelineMode::kTwoStage: return "two_stage";
    case PipelineMode::kIoSync: return "io_sync";
    case PipelineMode::kAdapter: return "adapter";
  }
  return "?";
}

std::string init_name(InitMode m) {
  switch (m) {
    case InitMode::kNoise: return "noise";
    case InitMode::kMeanLatent: return "mean_latent";
    case InitMode::kSdedit: return "sdedit";
  }
  return "?";
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw DomainError(key + ": cannot parse '" + value + "' as " + expected);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& raw, const char* expected) {
  const std::string s = trim(raw);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, raw, expected);
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) bad_value(key, raw, expected);
  return v;
}

double parse_double(const std::string& k, const std::string& s) {
  return parse_number<double>(k, s, "a finite number");
}
int parse_int(const std::string& k, const std::string& s) { return parse_number<int>(k, s, "an integer"); }

bool parse_bool(const std::string& k, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  bad_value(k, raw, "true or false");
}

// "f:n,f:n" with n read as int.
template <class Second>
std::vector<std::pair<double, Second>> parse_schedule(const std::string& k, const std::string& raw) {
  std::vector<std::pair<double, Second>> out;
  const std::string s = trim(raw);
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) bad_value(k, raw, "a list of fraction:count pairs");
    out.emplace_back(parse_double(k, item.substr(0, colon)), parse_int(k, item.substr(colon + 1)));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

template <class Second>
std::string fmt_schedule(const std::vector<std::pair<double, Second>>& sched) {
  std::string out;
  for (const auto& [f, n] : sched) {
    if (!out.empty()) out += ',';
    out += fmt(f) + ':' + fmt(n);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

Field double_field(std::string key, double PipelineConfig::*m) {
  return {key, [m](const PipelineConfig& c) { return fmt(c.*m); },
          [m](PipelineConfig& c, const std::string& k, const std::string& v) { c.*m = parse_double(k, v); }};
}
Field int_field(std::string key, int PipelineConfig::*m) {
  return {key, [m](const PipelineConfig& c) { return fmt(c.*m); },
          [m](PipelineConfig& c, const std::string& k, const std::string& v) { c.*m = parse_int(k, v); }};
}
Field fit_double(std::string key, double FitConfig::*m) {
  return {key, [m](const PipelineConfig& c) { return fmt(c.fit.*m); },
          [m](PipelineConfig& c, const std::string& k, const std::string& v) { c.fit.*m = parse_double(k, v); }};
}
Field fit_int(std::string key, int FitConfig::*m) {
  return {key, [m](const PipelineConfig& c) { return fmt(c.fit.*m); },
          [m](PipelineConfig& c, const std::string& k, const std::string& v) { c.fit.*m = parse_int(k, v); }};
}
Field weight(std::string key, double LossWeights::*m) {
  return {key, [m](const PipelineConfig& c) { return fmt(c.fit.weights.*m); },
          [m](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.fit.weights.*m = parse_double(k, v);
          }};
}
Field guidance(std::string key, double GuidanceConfig::*m) {
  return {key, [m](const PipelineConfig& c) { return fmt(c.guidance.*m); },
          [m](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.guidance.*m = parse_double(k, v);
          }};
}

template <class E>
Field enum_field(std::string key, E PipelineConfig::*m, std::vector<std::pair<std::string, E>> names) {
  return {key,
          [m, names](const PipelineConfig& c) {
            for (const auto& [n, e] : names)
              if (e == c.*m) return n;
            return std::string("?");
          },
          [m, names](PipelineConfig& c, const std::string& k, const std::string& raw) {
            const std::string v = trim(raw);
            std::string options;
            for (const auto& [n, e] : names) {
              if (n == v) {
                c.*m = e;
                return;
              }
              options += (options.empty() ? "" : "|") + n;
            }
            bad_value(k, raw, "one of " + options);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"id", [](const PipelineConfig& c) { return c.id; },
                 [](PipelineConfig& c, const std::string&, const std::string& v) { c.id = trim(v); }});
    f.push_back(enum_field<PipelineMode>("mode", &PipelineConfig::mode,
                                         {{"two_stage", PipelineMode::kTwoStage},
                                          {"io_sync", PipelineMode::kIoSync},
                                          {"adapter", PipelineMode::kAdapter}}));
    f.push_back({"seed", [](const PipelineConfig& c) { return std::to_string(c.seed); },
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   c.seed = parse_number<std::uint64_t>(k, v, "an unsigned 64-bit integer");
                 }});
    f.push_back({"condition", [](const PipelineConfig& c) { return c.condition; },
                 [](PipelineConfig& c, const std::string&, const std::string& v) { c.condition = trim(v); }});

    f.push_back({"world.preset", [](const PipelineConfig& c) { return c.world; },
                 [](PipelineConfig& c, const std::string&, const std::string& v) { c.world = trim(v); }});
    f.push_back({"world.resolution", [](const PipelineConfig& c) { return fmt(c.world_options.resolution); },
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   c.world_options.resolution = parse_int(k, v);
                 }});
    f.push_back({"world.view_noise", [](const PipelineConfig& c) { return fmt(c.world_options.view_noise); },
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   c.world_options.view_noise = parse_double(k, v);
                 }});

    f.push_back(int_field("sampler.steps", &PipelineConfig::steps));
    f.push_back({"sampler.deterministic", [](const PipelineConfig& c) { return fmt(c.deterministic); },
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   c.deterministic = parse_bool(k, v);
                 }});
    f.push_back(enum_field<DenoiseScope>("sampler.scope", &PipelineConfig::scope,
                                         {{"per_view", DenoiseScope::kPerView},
                                          {"joint", DenoiseScope::kJoint}}));
    f.push_back(double_field("sampler.t_init", &PipelineConfig::t_init));
    f.push_back(enum_field<InitMode>("sampler.init", &PipelineConfig::init,
                                     {{"noise", InitMode::kNoise},
                                      {"mean_latent", InitMode::kMeanLatent},
                                      {"sdedit", InitMode::kSdedit}}));
    f.push_back(int_field("sampler.template", &PipelineConfig::init_template));

    f.push_back(guidance("guidance.lambda_c", &GuidanceConfig::lambda_c));
    f.push_back(guidance("guidance.lambda_aug", &GuidanceConfig::lambda_aug));
    f.push_back(guidance("guidance.zero_feedback_prob", &GuidanceConfig::zero_feedback_prob));
    f.push_back(double_field("guidance.feedback_rho", &PipelineConfig::feedback_rho));

    f.push_back(int_field("reconstruct.volume_resolution", &PipelineConfig::volume_resolution));
    f.push_back(double_field("reconstruct.nerf_to_mesh_fraction", &PipelineConfig::nerf_to_mesh_fraction));
    f.push_back({"reconstruct.view_schedule",
                 [](const PipelineConfig& c) { return fmt_schedule(c.view_schedule); },
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   c.view_schedule = parse_schedule<int>(k, v);
                 }});
    f.push_back(enum_field<SyncPoint>("reconstruct.sync_point", &PipelineConfig::sync_point,
                                      {{"output", SyncPoint::kOutput}, {"input", SyncPoint::kInput}}));
    f.push_back({"reconstruct.sync_init", [](const PipelineConfig& c) { return fmt(c.sync_init); },
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   c.sync_init = parse_bool(k, v);
                 }});
    f.push_back(int_field("reconstruct.final_steps", &PipelineConfig::final_steps));
    f.push_back(int_field("reconstruct.final_lift_refine_steps", &PipelineConfig::final_lift_refine_steps));

    f.push_back(fit_int("fit.steps", &FitConfig::steps_per_denoise));
    f.push_back(fit_double("fit.lr_density", &FitConfig::lr_density));
    f.push_back(fit_double("fit.lr_color", &FitConfig::lr_color));
    f.push_back(fit_double("fit.beta1", &FitConfig::beta1));
    f.push_back(fit_double("fit.beta2", &FitConfig::beta2));
    f.push_back(fit_double("fit.adam_eps", &FitConfig::adam_eps));
    f.push_back(fit_double("fit.ray_step", &FitConfig::ray_step));
    f.push_back(fit_double("fit.entropy_shell", &FitConfig::entropy_shell));
    f.push_back(fit_double("fit.alpha_blur_px", &FitConfig::alpha_blur_px));
    f.push_back(fit_int("fit.erosion_iterations", &FitConfig::erosion_iterations));
    f.push_back(fit_double("fit.normal_alpha_threshold", &FitConfig::normal_alpha_threshold));
    f.push_back({"fit.resolution_schedule",
                 [](const PipelineConfig& c) { return fmt_schedule(c.fit.resolution_schedule); },
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   c.fit.resolution_schedule = parse_schedule<int>(k, v);
                 }});
    f.push_back({"fit.optimize_vertices", [](const PipelineConfig& c) { return fmt(c.fit.optimize_vertices); },
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   c.fit.optimize_vertices = parse_bool(k, v);
                 }});
    f.push_back(fit_double("fit.vertex_lr", &FitConfig::vertex_lr));
    f.push_back(fit_double("fit.mesh_iso", &FitConfig::mesh_iso));
    f.push_back(fit_int("fit.lift_stride", &FitConfig::lift_stride));
    f.push_back(fit_double("fit.lift_alpha_threshold", &FitConfig::lift_alpha_threshold));
    f.push_back(fit_double("fit.lift_scale", &FitConfig::lift_scale));
    f.push_back(fit_double("fit.lift_opacity", &FitConfig::lift_opacity));
    f.push_back(fit_int("fit.lift_refine_steps", &FitConfig::lift_refine_steps));
    f.push_back(fit_double("fit.lift_lr_opacity", &FitConfig::lift_lr_opacity));
    f.push_back(fit_double("fit.lift_lr_color", &FitConfig::lift_lr_color));
    f.push_back(weight("fit.weight_rgb", &LossWeights::rgb));
    f.push_back(weight("fit.weight_alpha", &LossWeights::alpha));
    f.push_back(weight("fit.weight_depth", &LossWeights::depth));
    f.push_back(weight("fit.weight_l1", &LossWeights::l1));
    f.push_back(weight("fit.weight_perceptual", &LossWeights::perceptual));
    f.push_back(weight("fit.weight_normal_tv", &LossWeights::normal_tv));
    f.push_back(weight("fit.weight_entropy", &LossWeights::entropy));
    f.push_back(weight("fit.weight_laplacian", &LossWeights::laplacian));
    f.push_back(weight("fit.weight_normal_consistency", &LossWeights::normal_consistency));
    return f;
  }();
  return table;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

void apply_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : fields())
    if (f.key == key) return f.set(cfg, key, value);
  throw LookupError("unknown config field '" + key + "'");
}

const std::vector<std::string>& required_config_keys() {
  static const std::vector<std::string> keys = {"mode", "seed"};
  return keys;
}

std::string config_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_entries(cfg)) j[k] = v;
  return j.dump();
}

std::string config_hash(const PipelineConfig& cfg) { return sha256_hex(config_json(cfg)); }

}  // namespace mvlab
