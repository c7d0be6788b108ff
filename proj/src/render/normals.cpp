#include "mvlab/render/normals.hpp"

#include <Eigen/Geometry>

#include "mvlab/core/errors.hpp"

namespace mvlab {
namespace {

struct Stencil {
  int plus_y, plus_x, minus_y, minus_x;
};

class NormalField {
 public:
  NormalField(const Image& depth, const Camera& cam, const Image* alpha, double threshold)
      : depth_(depth), cam_(cam), alpha_(alpha), threshold_(threshold) {
    if (depth.channels() != 1) throw StructuralError("normals_from_depth: depth must be 1 channel");
    if (alpha && (alpha->height() != depth.height() || alpha->width() != depth.width()))
      throw StructuralError("normals_from_depth: alpha and depth differ in size");
  }

  bool valid(int y, int x) const {
    if (y < 0 || x < 0 || y >= depth_.height() || x >= depth_.width()) return false;
    return !alpha_ || alpha_->at(0, y, x) >= threshold_;
  }

  Eigen::Vector3d ray(int y, int x) const { return cam_.camera_ray(x + 0.5, y + 0.5); }
  Eigen::Vector3d point(int y, int x) const { return depth_.at(0, y, x) * ray(y, x); }

  // Neighbor pair along one axis; false when neither side is usable.
  bool stencil(int y, int x, int dy, int dx, Stencil& s) const {
    const bool fwd = valid(y + dy, x + dx);
    const bool bwd = valid(y - dy, x - dx);
    if (!fwd && !bwd) return false;
    s.plus_y = fwd ? y + dy : y;
    s.plus_x = fwd ? x + dx : x;
    s.minus_y = bwd ? y - dy : y;
    s.minus_x = bwd ? x - dx : x;
    return true;
  }

 private:
  const Image& depth_;
  const Camera& cam_;
  const Image* alpha_;
  double threshold_;
};

}  // namespace

Image normals_from_depth(const Image& depth, const Camera& cam, const Image* alpha,
                         double alpha_threshold) {
  const NormalField field(depth, cam, alpha, alpha_threshold);
  Image out(depth.height(), depth.width(), 3);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      Stencil su, sv;
      if (!field.valid(y, x) || !field.stencil(y, x, 0, 1, su) || !field.stencil(y, x, 1, 0, sv))
        continue;
      const Eigen::Vector3d tu = field.point(su.plus_y, su.plus_x) - field.point(su.minus_y, su.minus_x);
      const Eigen::Vector3d tv = field.point(sv.plus_y, sv.plus_x) - field.point(sv.minus_y, sv.minus_x);
      const Eigen::Vector3d c = tv.cross(tu);
      const double len = c.norm();
      if (!(len > 1e-300)) continue;
      for (int k = 0; k < 3; ++k) out.at(k, y, x) = c[k] / len;
    }
  }
  return out;
}

void normals_from_depth_backward(const Image& depth, const Camera& cam, const Image& grad_normal,
                                 Image& grad_depth, const Image* alpha, double alpha_threshold) {
  const NormalField field(depth, cam, alpha, alpha_threshold);
  if (grad_depth.empty()) grad_depth = Image(depth.height(), depth.width(), 1);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      Stencil su, sv;
      if (!field.valid(y, x) || !field.stencil(y, x, 0, 1, su) || !field.stencil(y, x, 1, 0, sv))
        continue;
      const Eigen::Vector3d tu = field.point(su.plus_y, su.plus_x) - field.point(su.minus_y, su.minus_x);
      const Eigen::Vector3d tv = field.point(sv.plus_y, sv.plus_x) - field.point(sv.minus_y, sv.minus_x);
      const Eigen::Vector3d c = tv.cross(tu);
      const double len = c.norm();
      if (!(len > 1e-300)) continue;
      const Eigen::Vector3d n = c / len;
      const Eigen::Vector3d g(grad_normal.at(0, y, x), grad_normal.at(1, y, x), grad_normal.at(2, y, x));
      const Eigen::Vector3d gc = (g - n * n.dot(g)) / len;
      const Eigen::Vector3d g_tv = tu.cross(gc);
      const Eigen::Vector3d g_tu = gc.cross(tv);
      auto add = [&](int py, int px, const Eigen::Vector3d& gp) {
        grad_depth.at(0, py, px) += gp.dot(field.ray(py, px));
      };
      add(su.plus_y, su.plus_x, g_tu);
      add(su.minus_y, su.minus_x, -g_tu);
      add(sv.plus_y, sv.plus_x, g_tv);
      add(sv.minus_y, sv.minus_x, -g_tv);
    }
  }
}

}  // namespace mvlab
