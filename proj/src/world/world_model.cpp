#include "mvlab/world/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mvlab/core/errors.hpp"

namespace mvlab {

std::string_view kind_name(PrototypeKind kind) {
  switch (kind) {
    case PrototypeKind::kQuad: return "quad";
    case PrototypeKind::kVolume: return "volume";
    case PrototypeKind::kSplats: return "splats";
  }
  return "unknown";
}

std::vector<RenderOutput> render_object(const PrototypeObject& object,
                                        const std::vector<Camera>& cams, bool contribs) {
  return std::visit(
      [&](const auto& obj) -> std::vector<RenderOutput> {
        using T = std::decay_t<decltype(obj)>;
        if constexpr (std::is_same_v<T, TexturedQuad>) {
          std::vector<RenderOutput> out;
          for (const auto& cam : cams) {
            out.push_back(render_quad(obj, cam));
            if (contribs) {
              RenderOutput& r = out.back();
              r.contribs.assign(r.alpha.pixels(), {});
              for (std::size_t i = 0; i < r.alpha.pixels(); ++i)
                if (r.alpha.data()[i] > 0.0)
                  r.contribs[i].push_back({r.alpha.data()[i], r.depth.data()[i]});
            }
          }
          return out;
        } else if constexpr (std::is_same_v<T, VolumeGrid>) {
          RenderOptions opts;
          opts.contribs = contribs;
          return raymarch_views(obj, cams, opts);
        } else {
          SplatOptions opts;
          opts.contribs = contribs;
          return composite_views(obj, cams, opts);
        }
      },
      object);
}

WorldModel::WorldModel(std::string name, std::vector<Prototype> prototypes,
                       std::vector<Camera> cameras, double view_noise)
    : name_(std::move(name)),
      prototypes_(std::move(prototypes)),
      cameras_(std::move(cameras)),
      view_noise_(view_noise) {
  if (prototypes_.size() < 2) throw StructuralError("world needs at least 2 prototypes");
  if (cameras_.size() < 2) throw StructuralError("world needs at least 2 cameras");
  if (!(view_noise_ >= 0.0) || !std::isfinite(view_noise_))
    throw DomainError("view_noise must be finite and >= 0");
  for (const auto& cam : cameras_) {
    cam.validate();
    if (cam.width != cameras_.front().width || cam.height != cameras_.front().height)
      throw StructuralError("world cameras must share one resolution");
  }
  std::set<int> ids;
  double total = 0.0;
  for (const auto& p : prototypes_) {
    if (p.kind() != prototypes_.front().kind())
      throw StructuralError("world prototypes must share one object kind");
    if (!ids.insert(p.id).second)
      throw StructuralError("duplicate prototype id " + std::to_string(p.id));
    if (!(p.prior > 0.0 && p.prior <= 1.0))
      throw DomainError("prototype prior must lie in (0, 1]");
    total += p.prior;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("prototype priors must sum to 1");
  for (const auto& p : prototypes_) {
    if (const auto* g = std::get_if<VolumeGrid>(&p.object)) g->validate();
    if (const auto* s = std::get_if<SplatSet>(&p.object)) s->validate();
    const auto renders = render_object(p.object, cameras_);
    renders_.push_back(to_rgbad(renders));
    data_.push_back(renders_.back().leading_channels(data_channels()));
    feedback_.push_back(to_rgbd(renders));
  }
}

int WorldModel::index_of(int id) const {
  for (int i = 0; i < size(); ++i)
    if (prototypes_[i].id == id) return i;
  throw LookupError("unknown prototype id " + std::to_string(id));
}

std::vector<double> WorldModel::priors(std::string_view condition) const {
  std::vector<double> p(prototypes_.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (condition.empty() || prototypes_[k].condition == condition) {
      p[k] = prototypes_[k].prior;
      total += p[k];
    }
  if (total <= 0.0) throw LookupError("no prototype has condition '" + std::string(condition) + "'");
  for (double& v : p) v /= total;
  return p;
}

std::vector<std::string> WorldModel::condition_labels() const {
  std::vector<std::string> out;
  for (const auto& p : prototypes_)
    if (!p.condition.empty() && std::ranges::find(out, p.condition) == out.end())
      out.push_back(p.condition);
  return out;
}

ViewStack WorldModel::mean_data() const {
  ViewStack out(views(), data_channels(), height(), width());
  for (int k = 0; k < size(); ++k) out += prototypes_[k].prior * data_[k];
  return out;
}

ViewStack WorldModel::sample(Rng& rng, int* index) const {
  const double u = uniform01(rng);
  int k = size() - 1;
  double acc = 0.0;
  for (int i = 0; i < size(); ++i) {
    acc += prototypes_[i].prior;
    if (u < acc) {
      k = i;
      break;
    }
  }
  if (index) *index = k;
  ViewStack x = data_[k];
  if (view_noise_ > 0.0)
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += view_noise_ * standard_normal(rng);
  return x;
}

WorldModel WorldModel::resized(int width, int height) const {
  return WorldModel(name_, prototypes_, resize_cameras(cameras_, width, height), view_noise_);
}

WorldModel WorldModel::with_view_noise(double view_noise) const {
  WorldModel out = *this;
  if (!(view_noise >= 0.0) || !std::isfinite(view_noise))
    throw DomainError("view_noise must be finite and >= 0");
  out.view_noise_ = view_noise;
  return out;
}

ViewStack render_world(const WorldModel& world, int id) { return world.render(id); }

}  // namespace mvlab
