#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mvlab/core/random.hpp"
#include "mvlab/core/view_stack.hpp"
#include "mvlab/render/camera.hpp"
#include "mvlab/render/quad.hpp"
#include "mvlab/render/render_output.hpp"
#include "mvlab/render/splats.hpp"
#include "mvlab/render/volume.hpp"

namespace mvlab {

enum class PrototypeKind { kQuad, kVolume, kSplats };

using PrototypeObject = std::variant<TexturedQuad, VolumeGrid, SplatSet>;

struct Prototype {
  int id = 0;
  PrototypeObject object;
  double prior = 0.0;
  std::string condition;  // empty: no tag

  PrototypeKind kind() const { return static_cast<PrototypeKind>(object.index()); }
};

std::string_view kind_name(PrototypeKind kind);

// Full render of one object with per-ray contributions where the renderer has them.
std::vector<RenderOutput> render_object(const PrototypeObject& object,
                                        const std::vector<Camera>& cams, bool contribs = false);

// Finite mixture over known objects seen by a fixed camera rig.
//
// A clean data point is the render of prototype k (drawn with its prior) plus
// i.i.d. N(0, view_noise^2) jitter on every denoised channel. Quad worlds denoise
// rgb only; volume and splat worlds denoise the full rgb+alpha+depth stack.
class WorldModel {
 public:
  WorldModel(std::string name, std::vector<Prototype> prototypes, std::vector<Camera> cameras,
             double view_noise = 0.0);

  const std::string& name() const { return name_; }
  const std::vector<Prototype>& prototypes() const { return prototypes_; }
  const std::vector<Camera>& cameras() const { return cameras_; }
  double view_noise() const { return view_noise_; }
  PrototypeKind kind() const { return prototypes_.front().kind(); }

  int size() const { return static_cast<int>(prototypes_.size()); }
  int views() const { return static_cast<int>(cameras_.size()); }
  int height() const { return cameras_.front().height; }
  int width() const { return cameras_.front().width; }
  int data_channels() const { return kind() == PrototypeKind::kQuad ? channels::kRgb : channels::kRgbad; }

  // Position of the prototype with the given id; LookupError if absent.
  int index_of(int id) const;
  const Prototype& prototype(int id) const { return prototypes_[index_of(id)]; }

  // Cached RGBAD render, denoising-domain data and RGBD feedback-domain render.
  const ViewStack& render(int id) const { return renders_[index_of(id)]; }
  const ViewStack& data(int id) const { return data_[index_of(id)]; }
  const ViewStack& feedback_target(int id) const { return feedback_[index_of(id)]; }

  // Priors restricted to the prototypes tagged `condition` (all of them when
  // empty) and renormalized. LookupError when no prototype carries the tag.
  std::vector<double> priors(std::string_view condition = {}) const;
  std::vector<std::string> condition_labels() const;

  // Zero-jitter average of the data renders under the full prior.
  ViewStack mean_data() const;

  // One clean sample: prototype index drawn from the prior, then jitter.
  ViewStack sample(Rng& rng, int* index = nullptr) const;

  // Same world re-rendered at another resolution.
  WorldModel resized(int width, int height) const;
  WorldModel with_view_noise(double view_noise) const;

 private:
  std::string name_;
  std::vector<Prototype> prototypes_;
  std::vector<Camera> cameras_;
  double view_noise_ = 0.0;
  std::vector<ViewStack> renders_;
  std::vector<ViewStack> data_;
  std::vector<ViewStack> feedback_;
};

// Multi-view RGBAD render of prototype `id`; LookupError for unknown ids.
ViewStack render_world(const WorldModel& world, int id);

}  // namespace mvlab
