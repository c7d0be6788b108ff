#include "mvlab/world/presets.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "mvlab/core/errors.hpp"

namespace mvlab {

namespace {

// Smooth procedural albedo on [-1, 1]^2, deliberately asymmetric in s.
Eigen::Vector3d pattern(double s, double t) {
  return {0.5 + 0.35 * std::sin(2.2 * s + 0.6) * std::cos(1.3 * t),
          0.45 + 0.3 * std::tanh(1.5 * s) + 0.1 * std::sin(2.0 * t),
          0.5 + 0.3 * std::cos(1.7 * s - 1.1 * t)};
}

Image pattern_texture(int size, bool mirrored) {
  Image tex(size, size, 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double s = -1.0 + (2.0 * x + 1.0) / size;
      const double t = -1.0 + (2.0 * y + 1.0) / size;
      const Eigen::Vector3d c = pattern(mirrored ? -s : s, t);
      for (int ch = 0; ch < 3; ++ch) tex.at(ch, y, x) = c[ch];
    }
  return tex;
}

WorldModel bimodal_texture(const PresetOptions& opts) {
  const int res = opts.resolution > 0 ? opts.resolution : 32;
  std::vector<Prototype> protos;
  for (int k = 0; k < 2; ++k) {
    TexturedQuad q;
    q.half_u = {0.8, 0.0, 0.0};
    q.half_v = {0.0, 0.8, 0.0};
    q.texture = pattern_texture(16, k == 1);
    protos.push_back({k, q, 0.5, k == 0 ? "a" : "b"});
  }
  auto cams = orbit_cameras(4, 3.0, 10.0, -30.0, 20.0, 40.0, res, res);
  return WorldModel("bimodal-texture", std::move(protos), std::move(cams),
                    opts.view_noise >= 0.0 ? opts.view_noise : 0.0);
}

WorldModel tetra4(const PresetOptions& opts) {
  const int res = opts.resolution > 0 ? opts.resolution : 32;
  const std::array<Eigen::Vector3d, 4> corners = {
      Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(1, -1, -1), Eigen::Vector3d(-1, 1, -1),
      Eigen::Vector3d(-1, -1, 1)};
  const std::array<Eigen::Vector3d, 4> colors = {
      Eigen::Vector3d(0.9, 0.3, 0.2), Eigen::Vector3d(0.2, 0.8, 0.3),
      Eigen::Vector3d(0.25, 0.35, 0.9), Eigen::Vector3d(0.85, 0.8, 0.2)};
  std::vector<Prototype> protos;
  for (int k = 0; k < 4; ++k) {
    VolumeGrid g(16, Eigen::Vector3d::Constant(-1.0), Eigen::Vector3d::Constant(1.0));
    const Eigen::Vector3d c = 0.38 * corners[k];
    for (int z = 0; z < 16; ++z)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
          const Eigen::Vector3d p = g.position(x, y, z);
          const double r2 = (p - c).squaredNorm();
          const double r2c = p.squaredNorm();
          const std::size_t i = g.index(x, y, z);
          // A shared core plus one lobe per prototype.
          g.density[i] = 12.0 * std::exp(-r2 / (2 * 0.18 * 0.18)) +
                         8.0 * std::exp(-r2c / (2 * 0.2 * 0.2));
          const double mix = std::exp(-r2 / (2 * 0.3 * 0.3));
          for (int ch = 0; ch < 3; ++ch)
            g.color[3 * i + ch] = mix * colors[k][ch] + (1.0 - mix) * 0.6;
        }
    protos.push_back({k, std::move(g), 0.25, ""});
  }
  auto cams = orbit_cameras(4, 3.5, 20.0, 0.0, 90.0, 40.0, res, res);
  return WorldModel("tetra-4", std::move(protos), std::move(cams),
                    opts.view_noise >= 0.0 ? opts.view_noise : 0.0);
}

WorldModel bimodal_splat(const PresetOptions& opts) {
  const int res = opts.resolution > 0 ? opts.resolution : 64;
  constexpr int kGrid = 20;
  constexpr double kHalf = 0.7;
  constexpr double kTilt = 25.0 * std::numbers::pi / 180.0;
  const double spacing = 2.0 * kHalf / kGrid;
  std::vector<Prototype> protos;
  for (int k = 0; k < 2; ++k) {
    // Prototype 1 is the mirror image (x -> -x) of prototype 0.
    const double m = k == 0 ? 1.0 : -1.0;
    const Eigen::Vector3d u(m * std::cos(kTilt), 0.0, std::sin(kTilt));
    const Eigen::Vector3d v(0.0, 1.0, 0.0);
    SplatSet s;
    for (int j = 0; j < kGrid; ++j)
      for (int i = 0; i < kGrid; ++i) {
        const double a = -kHalf + (i + 0.5) * spacing;
        const double b = -kHalf + (j + 0.5) * spacing;
        s.add(a * u + b * v, 0.6 * spacing, 0.85, pattern(a / kHalf, b / kHalf));
      }
    protos.push_back({k, std::move(s), 0.5, ""});
  }
  auto cams = orbit_cameras(4, 3.0, 15.0, -45.0, 30.0, 40.0, res, res);
  return WorldModel("bimodal-splat", std::move(protos), std::move(cams),
                    opts.view_noise >= 0.0 ? opts.view_noise : 0.0);
}

}  // namespace

WorldModel make_world_preset(std::string_view name, const PresetOptions& opts) {
  if (name == "bimodal-texture") return bimodal_texture(opts);
  if (name == "tetra-4") return tetra4(opts);
  if (name == "bimodal-splat") return bimodal_splat(opts);
  throw LookupError("unknown world preset '" + std::string(name) + "'");
}

std::vector<std::string> world_preset_names() {
  return {"bimodal-texture", "tetra-4", "bimodal-splat"};
}

}  // namespace mvlab
