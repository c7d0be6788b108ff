// mvlab: run sampling pipelines and suites, the 1D score lab, and config checks.
#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "config_file.hpp"
#include "mvlab/core/errors.hpp"
#include "mvlab/core/hash.hpp"
#include "mvlab/diffusion/schedule.hpp"
#include "mvlab/pipeline/pipeline.hpp"
#include "mvlab/render/image_io.hpp"
#include "mvlab/render/mesh.hpp"
#include "mvlab/scorelab/sampling.hpp"
#include "mvlab/world/presets.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mvlab;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

// SOURCE_DATE_EPOCH pins the timestamp for reproducible manifests.
std::string timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* e = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::atoll(e));
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json config_object(const PipelineConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : config_entries(c)) j[k] = v;
  return j;
}

// Hash of everything that determines the outputs: resolved configs and seed count.
std::string resolved_hash(const std::vector<PipelineConfig>& configs, int n_seeds) {
  json j = json::array();
  for (const auto& c : configs) j.push_back(config_object(c));
  return sha256_hex(json{{"configs", j}, {"seeds", n_seeds}}.dump());
}

void write_manifest(const fs::path& out, const std::string& command, const std::string& config_path,
                    const std::string& hash, json resolved) {
  json files = json::array();
  std::vector<fs::path> paths;
  for (const auto& e : fs::recursive_directory_iterator(out))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths)
    files.push_back({{"path", fs::relative(p, out).generic_string()}, {"sha256", sha256_file(p.string())}});
  json m;
  m["tool"] = "mvlab";
  m["version"] = kVersion;
  m["command"] = command;
  m["config_path"] = config_path;
  m["config_hash"] = hash;
  m["resolved_config"] = std::move(resolved);
  m["output_dir"] = out.string();
  m["timestamp"] = timestamp();
  m["files"] = files;
  write_text(out / "manifest.json", m.dump(2) + "\n");
}

std::string run_dir_name(const RunReport& r) {
  return r.config_id + "-s" + std::to_string(r.seed);
}

void write_run_artifacts(const fs::path& dir, const RunReport& r) {
  fs::create_directories(dir);
  write_text(dir / "report.json", report_json(r));
  if (!r.error.empty()) return;
  write_png((dir / "terminal.png").string(), contact_sheet(r.terminal));
  if (r.terminal.channels() >= 5) {
    ViewStack depth(r.terminal.views(), 1, r.terminal.height(), r.terminal.width());
    for (int v = 0; v < depth.views(); ++v) {
      const auto src = r.terminal.plane(v, 4);
      std::copy(src.begin(), src.end(), depth.plane(v, 0).begin());
    }
    write_pfm((dir / "terminal_depth.pfm").string(), contact_sheet(depth));
  }
  if (!r.feedback.empty()) write_png((dir / "feedback.png").string(), contact_sheet(r.feedback));
  if (!r.final_renders.empty()) {
    write_png((dir / "final.png").string(), contact_sheet(to_data_channels(r.final_renders, 3)));
  }
  if (r.final_state.phase == ReconPhase::kMesh) write_obj((dir / "mesh.obj").string(), r.final_state.mesh);
}

int execute(const std::string& command, const std::string& config_path,
            const cli::Overrides& overrides, const std::string* seed, int n_seeds, int jobs,
            const fs::path& out) {
  const std::vector<PipelineConfig> configs = cli::load_configs(config_path, overrides, seed);
  fs::create_directories(out);
  const std::size_t total = configs.size() * static_cast<std::size_t>(n_seeds);
  std::size_t done = 0;
  const SuiteResult result = run_suite(configs, n_seeds, jobs, [&](const RunReport& r) {
    ++done;
    std::fprintf(stderr, "[%zu/%zu] %s seed %llu: ", done, total, r.config_id.c_str(),
                 static_cast<unsigned long long>(r.seed));
    if (!r.error.empty()) {
      std::fprintf(stderr, "error: %s\n", r.error.c_str());
    } else {
      for (const auto& [k, v] : r.metrics) std::fprintf(stderr, "%s=%.6g ", k.c_str(), v);
      std::fprintf(stderr, "\n");
    }
  });

  std::string errors;
  json runs = json::array();
  for (const RunReport& r : result.runs) {
    write_run_artifacts(out / "runs" / run_dir_name(r), r);
    runs.push_back(json::parse(report_json(r)));
    if (!r.error.empty()) errors += run_dir_name(r) + ": " + r.error + "\n";
  }
  json rows = json::array();
  for (const SuiteRow& row : result.rows) {
    json med = json::object(), iq = json::object();
    for (const auto& [k, v] : row.median) med[k] = std::isfinite(v) ? json(v) : json(nullptr);
    for (const auto& [k, v] : row.iqr) iq[k] = std::isfinite(v) ? json(v) : json(nullptr);
    rows.push_back({{"config_id", row.config_id}, {"runs", row.runs}, {"failures", row.failures},
                    {"median", med}, {"iqr", iq}});
  }
  const std::string hash = resolved_hash(configs, n_seeds);
  write_text(out / "report.json",
             json{{"config_hash", hash}, {"seeds", n_seeds}, {"rows", rows}, {"runs", runs}}.dump(2) + "\n");
  write_text(out / "table.csv", suite_csv(result));
  if (!errors.empty()) write_text(out / "errors.log", errors);

  json resolved = json::array();
  for (const auto& c : configs) resolved.push_back(config_object(c));
  write_manifest(out, command, config_path, hash, resolved);
  if (!errors.empty()) {
    std::fprintf(stderr, "%s", errors.c_str());
    return kExitRuntime;
  }
  return 0;
}

int cmd_validate(const std::string& config_path, const cli::Overrides& overrides,
                 const std::string* seed) {
  const auto configs = cli::load_configs(config_path, overrides, seed);
  for (const auto& c : configs) {
    std::cout << "# " << c.id << " " << config_hash(c) << "\n";
    for (const auto& [k, v] : config_entries(c)) std::cout << k << " = " << v << "\n";
  }
  return 0;
}

int cmd_scorelab(const std::string& preset_id, std::uint64_t seed, int samples, int steps,
                 const fs::path& out) {
  const scorelab::ScorePreset* preset = nullptr;
  for (const auto& p : scorelab::score_presets())
    if (p.id == preset_id) preset = &p;
  if (!preset) throw cli::ConfigError("unknown scorelab preset '" + preset_id + "'");
  if (samples < 1 || steps < 1) throw cli::ConfigError("--samples and --steps must be positive");

  const NoiseSchedule sched = NoiseSchedule::variance_preserving();
  scorelab::SamplerOptions opts;
  opts.n_samples = samples;
  opts.n_steps = steps;
  opts.seed = seed;
  const auto exact = scorelab::sample_product(preset->first, preset->second,
                                              scorelab::ProductMode::kExactProduct, sched, opts);
  const auto averaged = scorelab::sample_product(preset->first, preset->second,
                                                 scorelab::ProductMode::kAveraged, sched, opts);
  const scorelab::GaussianMixture1D product =
      scorelab::product_mixture_1d(preset->first, preset->second);
  const scorelab::Histogram h_exact = scorelab::make_histogram(exact);
  const scorelab::Histogram h_avg = scorelab::make_histogram(averaged);

  std::string csv = "x,p_product,p_exact_hist,p_averaged_hist\n";
  char buf[128];
  for (int i = 0; i < h_exact.bins(); ++i) {
    const double x = h_exact.center(i);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", x, scorelab::density_1d(product, x),
                  h_exact.density(i), h_avg.density(i));
    csv += buf;
  }
  fs::create_directories(out);
  write_text(out / "density.csv", csv);
  const double kl_exact = scorelab::histogram_kl(h_exact, product);
  const double kl_avg = scorelab::histogram_kl(h_avg, product);
  json summary{{"preset", preset_id}, {"samples", samples}, {"steps", steps}, {"seed", seed},
               {"kl_exact", kl_exact}, {"kl_averaged", kl_avg}, {"kl_ratio", kl_avg / kl_exact}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  write_manifest(out, "scorelab", "", sha256_hex(json{{"preset", preset_id}, {"samples", samples},
                                                       {"steps", steps}, {"seed", seed}}.dump()),
                 json{{"preset", preset_id}, {"samples", samples}, {"steps", steps}, {"seed", seed}});
  std::printf("KL(exact) = %.6g  KL(averaged) = %.6g\n", kl_exact, kl_avg);
  return 0;
}

int cmd_presets() {
  std::cout << "world presets:\n";
  for (const auto& n : world_preset_names()) std::cout << "  " << n << "\n";
  std::cout << "scorelab presets:\n";
  for (const auto& p : scorelab::score_presets()) std::cout << "  " << p.id << "\n";
  std::cout << "config fields (defaults):\n";
  for (const auto& [k, v] : config_entries(PipelineConfig{})) std::cout << "  " << k << " = " << v << "\n";
  std::cout << "required: ";
  for (const auto& k : required_config_keys()) std::cout << k << " ";
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view diffusion toy lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path, out_dir, seed_text, preset;
  std::vector<std::string> sets;
  int jobs = 1, seeds = 20, samples = 10000, steps = 30;
  std::uint64_t lab_seed = 0;

  auto add_config_opts = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "INI config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "Override KEY=VAL (repeatable)");
    sub->add_option("--seed", seed_text, "Override the seed field");
  };
  CLI::App* run = app.add_subcommand("run", "Run the configured pipeline(s) once");
  add_config_opts(run);
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

  CLI::App* suite = app.add_subcommand("suite", "Run every config over paired seeds");
  add_config_opts(suite);
  suite->add_option("--out", out_dir, "Output directory")->required();
  suite->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  suite->add_option("--seeds", seeds, "Seeds per config")->check(CLI::PositiveNumber);

  CLI::App* lab = app.add_subcommand("scorelab", "1D averaged-score vs exact-product experiment");
  lab->add_option("preset", preset, "Score preset id")->required();
  lab->add_option("--out", out_dir, "Output directory")->required();
  lab->add_option("--seed", lab_seed, "Seed");
  lab->add_option("--samples", samples, "Samples per sampler");
  lab->add_option("--steps", steps, "Sampler steps");

  CLI::App* validate = app.add_subcommand("validate", "Check a config and print it resolved");
  add_config_opts(validate);

  app.add_subcommand("presets", "List presets and config fields");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    cli::Overrides overrides;
    for (const auto& s : sets) overrides.push_back(cli::parse_override(s));
    const std::string* seed = seed_text.empty() ? nullptr : &seed_text;
    if (*run) return execute("run", config_path, overrides, seed, 1, jobs, out_dir);
    if (*suite) return execute("suite", config_path, overrides, seed, seeds, jobs, out_dir);
    if (*validate) return cmd_validate(config_path, overrides, seed);
    if (*lab) return cmd_scorelab(preset, lab_seed, samples, steps, out_dir);
    return cmd_presets();
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
