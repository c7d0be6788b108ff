#include "mvlab/render/render_output.hpp"

#include <algorithm>

#include "mvlab/core/errors.hpp"

namespace mvlab {

RenderOutput RenderOutput::blank(int height, int width) {
  RenderOutput out;
  out.rgb = Image(height, width, 3);
  out.alpha = Image(height, width, 1);
  out.depth = Image(height, width, 1);
  out.normal = Image(height, width, 3);
  return out;
}

namespace {

ViewStack pack(const std::vector<RenderOutput>& renders, bool with_alpha) {
  if (renders.empty()) return {};
  const int h = renders.front().height();
  const int w = renders.front().width();
  const int ch = with_alpha ? channels::kRgbad : channels::kRgbd;
  ViewStack out(static_cast<int>(renders.size()), ch, h, w);
  for (int v = 0; v < out.views(); ++v) {
    const RenderOutput& r = renders[v];
    if (r.height() != h || r.width() != w) throw StructuralError("renders differ in resolution");
    for (int c = 0; c < 3; ++c) std::ranges::copy(r.rgb.channel(c), out.plane(v, c).begin());
    if (with_alpha) {
      std::ranges::copy(r.alpha.channel(0), out.plane(v, channels::kAlpha).begin());
      std::ranges::copy(r.depth.channel(0), out.plane(v, channels::kDepth).begin());
    } else {
      std::ranges::copy(r.depth.channel(0), out.plane(v, channels::kFeedbackDepth).begin());
    }
  }
  return out;
}

}  // namespace

ViewStack to_rgbad(const std::vector<RenderOutput>& renders) { return pack(renders, true); }
ViewStack to_rgbd(const std::vector<RenderOutput>& renders) { return pack(renders, false); }

RenderOutput from_rgbad(const ViewStack& x, int v) {
  if (x.channels() != channels::kRgbad) throw StructuralError("from_rgbad: expected 5 channels");
  RenderOutput out = RenderOutput::blank(x.height(), x.width());
  for (int c = 0; c < 3; ++c) std::ranges::copy(x.plane(v, c), out.rgb.channel(c).begin());
  std::ranges::copy(x.plane(v, channels::kAlpha), out.alpha.channel(0).begin());
  std::ranges::copy(x.plane(v, channels::kDepth), out.depth.channel(0).begin());
  return out;
}

}  // namespace mvlab
