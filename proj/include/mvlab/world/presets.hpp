#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mvlab/world/world_model.hpp"

namespace mvlab {

// Overrides applied on top of a preset's defaults; non-positive / negative values keep them.
struct PresetOptions {
  int resolution = 0;
  double view_noise = -1.0;
};

// "bimodal-texture": two camera-facing quads whose textures are mirror images,
//                    tagged "a" and "b".
// "tetra-4":         four colored density blobs at the corners of a tetrahedron.
// "bimodal-splat":   two splat surfaces tilted in opposite directions with
//                    mirrored textures, seen by a mirror-symmetric camera rig.
WorldModel make_world_preset(std::string_view name, const PresetOptions& opts = {});
std::vector<std::string> world_preset_names();

}  // namespace mvlab
