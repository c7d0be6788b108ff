#include "config_file.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mvlab/core/errors.hpp"
#include "mvlab/world/presets.hpp"

namespace mvlab::cli {

namespace pt = boost::property_tree;

std::pair<std::string, std::string> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects KEY=VAL, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

namespace {

struct Entry {
  std::string key;
  std::string value;
  int line = 0;  // 0: not from the file
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Line numbers of "key =" entries per section, for diagnostics only.
std::map<std::pair<std::string, std::string>, int> line_index(const std::string& path) {
  std::map<std::pair<std::string, std::string>, int> out;
  std::ifstream in(path);
  std::string line, section;
  for (int n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq != std::string::npos) out.emplace(std::make_pair(section, trim(t.substr(0, eq))), n);
  }
  return out;
}

std::string where(const std::string& path, int line) {
  return line > 0 ? path + ":" + std::to_string(line) + ": " : std::string();
}

void apply(PipelineConfig& cfg, const Entry& e, const std::string& path) {
  try {
    apply_config_value(cfg, e.key, e.value);
  } catch (const LookupError&) {
    throw ConfigError(where(path, e.line) + "unknown field '" + e.key + "'");
  } catch (const DomainError& err) {
    throw ConfigError(where(path, e.line) + err.what());
  }
}

}  // namespace

std::vector<PipelineConfig> load_configs(const std::string& path, const Overrides& overrides,
                                         const std::string* seed_override) {
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(path + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const auto lines = line_index(path);

  std::vector<Entry> base;
  std::vector<std::pair<std::string, std::vector<Entry>>> variants;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      base.push_back({name, node.data(), lines.count({"", name}) ? lines.at({"", name}) : 0});
      continue;
    }
    const bool is_variant = name.rfind("variant.", 0) == 0;
    if (is_variant) variants.emplace_back(name.substr(8), std::vector<Entry>{});
    for (const auto& [key, leaf] : node) {
      if (!leaf.empty()) throw ConfigError(path + ": nested table under '" + name + "." + key + "'");
      const int line = lines.count({name, key}) ? lines.at({name, key}) : 0;
      if (is_variant)
        variants.back().second.push_back({key, leaf.data(), line});
      else
        base.push_back({name + "." + key, leaf.data(), line});
    }
  }
  if (variants.empty()) variants.emplace_back(std::string(), std::vector<Entry>{});

  std::vector<PipelineConfig> out;
  std::set<std::string> ids;
  for (const auto& [vid, entries] : variants) {
    PipelineConfig cfg;
    std::set<std::string> seen;
    for (const Entry& e : base) {
      apply(cfg, e, path);
      seen.insert(e.key);
    }
    if (!vid.empty()) {
      if (!ids.insert(vid).second)
        throw ConfigError(path + ": duplicate variant '" + vid + "'");
      cfg.id = vid;
      for (const Entry& e : entries) {
        if (e.key == "id") throw ConfigError(where(path, e.line) + "variants take their id from the section name");
        apply(cfg, e, path);
        seen.insert(e.key);
      }
    }
    for (const auto& [k, v] : overrides) {
      apply(cfg, {k, v, 0}, path);
      seen.insert(k);
    }
    if (seed_override) {
      apply(cfg, {"seed", *seed_override, 0}, path);
      seen.insert("seed");
    }
    for (const std::string& k : required_config_keys())
      if (!seen.count(k))
        throw ConfigError(path + ": missing required field '" + k + "'" +
                          (vid.empty() ? "" : " in variant '" + vid + "'"));
    try {
      cfg.validate();
      if (!cfg.condition.empty())
        make_world_preset(cfg.world, cfg.world_options).priors(cfg.condition);
    } catch (const DomainError& e) {
      const std::string msg = e.what();
      const std::string key = msg.substr(0, msg.find(':'));
      int line = 0;
      for (const Entry& en : base)
        if (en.key == key) line = en.line;
      for (const Entry& en : entries)
        if (en.key == key) line = en.line;
      throw ConfigError((line > 0 ? where(path, line) : path + ": ") + msg);
    } catch (const LookupError& e) {
      throw ConfigError(path + ": condition: " + e.what());
    }
    out.push_back(std::move(cfg));
  }
  return out;
}

}  // namespace mvlab::cli
