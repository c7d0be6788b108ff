#include "mvlab/metrics/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mvlab/core/errors.hpp"

namespace mvlab {

void LossWeights::validate() const {
  for (double v : {rgb, alpha, depth, l1, perceptual, normal_tv, entropy, laplacian,
                   normal_consistency})
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("loss weights must be finite and >= 0");
}

RenderGrad RenderGrad::zeros(int height, int width) {
  return {Image(height, width, 3), Image(height, width, 1), Image(height, width, 1),
          Image(height, width, 3)};
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Weighted L1 over one channel; returns sum |d| and adds scale * sign(d) to grad.
double channel_l1(std::span<const double> a, std::span<const double> b, double* grad, double scale) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += std::abs(d);
    if (grad) grad[i] += scale * sign(d);
  }
  return acc;
}

}  // namespace

double l1_rgbad(const RenderOutput& render, const RenderOutput& target, const LossWeights& w,
                RenderGrad* grad) {
  w.validate();
  require_same_shape(render.rgb, target.rgb, "l1_rgbad rgb");
  require_same_shape(render.alpha, target.alpha, "l1_rgbad alpha");
  require_same_shape(render.depth, target.depth, "l1_rgbad depth");
  const double wsum = 3.0 * w.rgb + w.alpha + w.depth;
  if (wsum <= 0.0) return 0.0;
  const double npix = static_cast<double>(render.alpha.pixels());
  double total = 0.0;
  auto term = [&](const Image& a, const Image& b, Image* g, int c, double weight) {
    if (weight == 0.0) return;
    const double scale = weight / (wsum * npix);
    total += weight * channel_l1(a.channel(c), b.channel(c), g ? g->channel(c).data() : nullptr,
                                 scale) /
             npix;
  };
  for (int c = 0; c < 3; ++c) term(render.rgb, target.rgb, grad ? &grad->rgb : nullptr, c, w.rgb);
  term(render.alpha, target.alpha, grad ? &grad->alpha : nullptr, 0, w.alpha);
  term(render.depth, target.depth, grad ? &grad->depth : nullptr, 0, w.depth);
  return total / wsum;
}

double l1_rgbad(const ViewStack& render, const ViewStack& target, const LossWeights& w) {
  w.validate();
  require_same_shape(render, target, "l1_rgbad");
  const int ch = render.channels();
  if (ch != channels::kRgbad && ch != channels::kRgb)
    throw StructuralError("l1_rgbad expects 3 or 5 channels");
  std::vector<double> cw = {w.rgb, w.rgb, w.rgb};
  if (ch == channels::kRgbad) cw.insert(cw.end(), {w.alpha, w.depth});
  const double wsum = std::accumulate(cw.begin(), cw.end(), 0.0);
  if (wsum <= 0.0 || render.empty()) return 0.0;
  const double npix = static_cast<double>(render.height()) * render.width() * render.views();
  double total = 0.0;
  for (int v = 0; v < render.views(); ++v)
    for (int c = 0; c < ch; ++c)
      if (cw[c] > 0.0)
        total += cw[c] * channel_l1(render.plane(v, c), target.plane(v, c), nullptr, 0.0) / npix;
  return total / wsum;
}

double rend_weight(double t, const NoiseSchedule& sched) {
  const double a = sched.alpha(t), s = sched.sigma(t);
  return a / std::sqrt(a * a + s * s);
}

double normal_tv_l15(const Image& normal, const Image& mask, Image* grad) {
  if (normal.height() != mask.height() || normal.width() != mask.width() || mask.channels() != 1)
    throw StructuralError("normal_tv_l15: mask must be a single channel of the normal map's size");
  if (grad) require_same_shape(normal, *grad, "normal_tv_l15 grad");
  const int h = normal.height(), w = normal.width();
  const double eps2 = kTvEpsilon * kTvEpsilon;
  // Same expression as the per-pixel term so a zero gradient cancels exactly.
  const double floor = std::pow(eps2, 0.75);
  double total = 0.0;
  for (int c = 0; c < normal.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double m = mask.at(0, y, x);
        if (m == 0.0) continue;
        const double n0 = normal.at(c, y, x);
        const double gx = x + 1 < w ? normal.at(c, y, x + 1) - n0 : 0.0;
        const double gy = y + 1 < h ? normal.at(c, y + 1, x) - n0 : 0.0;
        const double q = m * m * (gx * gx + gy * gy) + eps2;
        total += std::pow(q, 0.75) - floor;
        if (!grad) continue;
        // d/dg of q^{3/4} = 1.5 q^{-1/4} m^2 g
        const double k = 1.5 * std::pow(q, -0.25) * m * m;
        if (x + 1 < w) {
          grad->at(c, y, x + 1) += k * gx;
          grad->at(c, y, x) -= k * gx;
        }
        if (y + 1 < h) {
          grad->at(c, y + 1, x) += k * gy;
          grad->at(c, y, x) -= k * gy;
        }
      }
  return total;
}

Image erode_mask(const Image& mask, int iterations) {
  Image cur = mask;
  for (int it = 0; it < iterations; ++it) {
    Image next = cur;
    for (int c = 0; c < cur.channels(); ++c)
      for (int y = 0; y < cur.height(); ++y)
        for (int x = 0; x < cur.width(); ++x) {
          double m = cur.at(c, y, x);
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy >= 0 && yy < cur.height() && xx >= 0 && xx < cur.width())
                m = std::min(m, cur.at(c, yy, xx));
            }
          next.at(c, y, x) = m;
        }
    cur = std::move(next);
  }
  return cur;
}

void RayProfile::validate() const {
  if (taus.size() != p.size() || p.size() != delta_tau.size())
    throw StructuralError("RayProfile: taus, p and delta_tau must have equal length");
  double mass = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || delta_tau[i] < 0.0) throw DomainError("RayProfile: negative p or spacing");
    mass += p[i] * delta_tau[i];
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("RayProfile: alpha outside [0, 1]");
  if (std::abs(mass - alpha) > 1e-6) throw DomainError("RayProfile: sum p dtau differs from alpha");
}

double ray_entropy(const RayProfile& ray, double d, std::vector<double>* grad_p,
                   double* grad_alpha) {
  if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("ray_entropy: d must be positive");
  ray.validate();
  if (grad_p) grad_p->assign(ray.p.size(), 0.0);
  double h = 0.0;
  for (std::size_t i = 0; i < ray.p.size(); ++i) {
    const double p = ray.p[i];
    if (p <= 0.0) continue;
    h -= p * std::log(p) * ray.delta_tau[i];
    if (grad_p) (*grad_p)[i] = -(std::log(p) + 1.0) * ray.delta_tau[i];
  }
  const double bg = 1.0 - ray.alpha;
  if (bg > 0.0) {
    h -= bg * std::log(bg / d);
    if (grad_alpha) *grad_alpha = std::log(bg / d) + 1.0;
  } else if (grad_alpha) {
    *grad_alpha = 0.0;
  }
  return h;
}

namespace {

std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh) {
  std::vector<std::vector<int>> nb(mesh.vertices.size());
  for (const auto& f : mesh.faces)
    for (int e = 0; e < 3; ++e) {
      const int a = f[e], b = f[(e + 1) % 3];
      nb[a].push_back(b);
      nb[b].push_back(a);
    }
  for (auto& n : nb) {
    std::ranges::sort(n);
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return nb;
}

}  // namespace

double laplacian_smoothing(const TriMesh& mesh, std::vector<Eigen::Vector3d>* grad) {
  mesh.validate();
  if (mesh.empty()) throw StructuralError("laplacian_smoothing: empty mesh");
  const auto nb = vertex_neighbors(mesh);
  std::vector<Eigen::Vector3d> lap(mesh.vertices.size(), Eigen::Vector3d::Zero());
  int count = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    if (nb[i].empty()) continue;
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (int j : nb[i]) c += mesh.vertices[j];
    lap[i] = c / nb[i].size() - mesh.vertices[i];
    total += lap[i].squaredNorm();
    ++count;
  }
  if (grad) {
    grad->assign(mesh.vertices.size(), Eigen::Vector3d::Zero());
    for (std::size_t i = 0; i < nb.size(); ++i) {
      if (nb[i].empty()) continue;
      const Eigen::Vector3d g = 2.0 * lap[i] / count;
      (*grad)[i] -= g;
      for (int j : nb[i]) (*grad)[j] += g / nb[i].size();
    }
  }
  return total / count;
}

double normal_consistency(const TriMesh& mesh) {
  mesh.validate();
  std::map<std::pair<int, int>, std::vector<int>> edges;
  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f)
    for (int e = 0; e < 3; ++e) {
      const int a = mesh.faces[f][e], b = mesh.faces[f][(e + 1) % 3];
      edges[{std::min(a, b), std::max(a, b)}].push_back(f);
    }
  double total = 0.0;
  long pairs = 0;
  for (const auto& [edge, faces] : edges)
    for (std::size_t i = 0; i < faces.size(); ++i)
      for (std::size_t j = i + 1; j < faces.size(); ++j) {
        total += 1.0 - mesh.face_normal(faces[i]).dot(mesh.face_normal(faces[j]));
        ++pairs;
      }
  return pairs ? total / pairs : 0.0;
}

double depth_distortion_pixel(const RayContribs& contribs) {
  // Sorted by depth, sum_{m,n} w_m w_n |t_m - t_n| = 2 sum_m w_m (t_m W_<m - S_<m)
  // with W, S the running sums of w and w t.
  std::vector<Contribution> c(contribs.begin(), contribs.end());
  for (const auto& e : c)
    if (e.weight < 0.0) throw DomainError("depth_distortion_pixel: negative weight");
  std::ranges::sort(c, {}, &Contribution::depth);
  double w_acc = 0.0, s_acc = 0.0, total = 0.0;
  for (const auto& e : c) {
    total += e.weight * (e.depth * w_acc - s_acc);
    w_acc += e.weight;
    s_acc += e.weight * e.depth;
  }
  return 2.0 * total;
}

double mdd(const std::vector<RenderOutput>& renders) {
  double dist = 0.0, alpha = 0.0;
  for (const auto& r : renders) {
    if (!r.has_contribs()) throw StructuralError("mdd requires per-ray contributions");
    for (const auto& c : r.contribs) dist += depth_distortion_pixel(c);
    for (double a : r.alpha.data()) alpha += a;
  }
  return alpha > 0.0 ? dist / alpha : 0.0;
}

double mdd(const RenderOutput& render) { return mdd(std::vector<RenderOutput>{render}); }

namespace {

constexpr double kLcnStabilizer = 1e-2;

struct Window {
  int y0, y1, x0, x1;
  double count() const { return static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1)); }
};

Window window_at(int y, int x, int h, int w) {
  return {std::max(y - 1, 0), std::min(y + 1, h - 1), std::max(x - 1, 0), std::min(x + 1, w - 1)};
}

struct Lcn {
  Image value, mean, scale;
};

Lcn lcn(const Image& img) {
  const int h = img.height(), w = img.width();
  Lcn out{Image(h, w, img.channels()), Image(h, w, img.channels()), Image(h, w, img.channels())};
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const Window win = window_at(y, x, h, w);
        double mu = 0.0;
        for (int yy = win.y0; yy <= win.y1; ++yy)
          for (int xx = win.x0; xx <= win.x1; ++xx) mu += img.at(c, yy, xx);
        mu /= win.count();
        double var = 0.0;
        for (int yy = win.y0; yy <= win.y1; ++yy)
          for (int xx = win.x0; xx <= win.x1; ++xx) var += std::pow(img.at(c, yy, xx) - mu, 2);
        var /= win.count();
        const double s = std::sqrt(var + kLcnStabilizer);
        out.mean.at(c, y, x) = mu;
        out.scale.at(c, y, x) = s;
        out.value.at(c, y, x) = (img.at(c, y, x) - mu) / s;
      }
  return out;
}

// Pulls d/d(lcn value) back to d/d(image).
Image lcn_backward(const Image& img, const Lcn& f, const Image& g) {
  const int h = img.height(), w = img.width();
  Image out(h, w, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double gp = g.at(c, y, x);
        if (gp == 0.0) continue;
        const Window win = window_at(y, x, h, w);
        const double n = win.count(), s = f.scale.at(c, y, x), mu = f.mean.at(c, y, x);
        const double np = f.value.at(c, y, x);
        // dn_p/dx_q = (delta_pq - 1/n) / s - n_p (x_q - mu) / (n s^2)
        for (int yy = win.y0; yy <= win.y1; ++yy)
          for (int xx = win.x0; xx <= win.x1; ++xx)
            out.at(c, yy, xx) += gp * (-1.0 / (n * s) - np * (img.at(c, yy, xx) - mu) / (n * s * s));
        out.at(c, y, x) += gp / s;
      }
  return out;
}

Image upsample2_adjoint(const Image& g, int h, int w) {
  // Adjoint of downsample2: each source pixel receives a quarter of its block's gradient.
  Image out(h, w, g.channels());
  for (int c = 0; c < g.channels(); ++c)
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) out.at(c, 2 * y + dy, 2 * x + dx) = 0.25 * g.at(c, y, x);
  return out;
}

}  // namespace

double patch_perceptual(const Image& a, const Image& b, Image* grad_a) {
  require_same_shape(a, b, "patch_perceptual");
  if (grad_a) *grad_a = Image(a.height(), a.width(), a.channels());
  std::vector<Image> as{a}, bs{b};
  for (int s = 1; s < 3; ++s) {
    if (as.back().height() < 2 || as.back().width() < 2) break;
    as.push_back(downsample2(as.back()));
    bs.push_back(downsample2(bs.back()));
  }
  const double nscales = static_cast<double>(as.size());
  double total = 0.0;
  std::vector<Image> grads(as.size());
  for (std::size_t s = 0; s < as.size(); ++s) {
    const Lcn fa = lcn(as[s]);
    const Lcn fb = lcn(bs[s]);
    const double n = static_cast<double>(as[s].size());
    Image g(as[s].height(), as[s].width(), as[s].channels());
    double acc = 0.0;
    for (std::size_t i = 0; i < as[s].size(); ++i) {
      const double d = fa.value.data()[i] - fb.value.data()[i];
      acc += d * d;
      g.data()[i] = 2.0 * d / (n * nscales);
    }
    total += acc / n;
    if (grad_a) grads[s] = lcn_backward(as[s], fa, g);
  }
  if (grad_a) {
    for (std::size_t s = as.size(); s-- > 1;) {
      Image up = upsample2_adjoint(grads[s], as[s - 1].height(), as[s - 1].width());
      for (std::size_t i = 0; i < up.size(); ++i) grads[s - 1].data()[i] += up.data()[i];
    }
    *grad_a = std::move(grads[0]);
  }
  return total / nscales;
}

double psnr(const Image& a, const Image& b, double peak) {
  require_same_shape(a, b, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += std::pow(a.data()[i] - b.data()[i], 2);
  mse /= static_cast<double>(a.size());
  return mse > 0.0 ? 10.0 * std::log10(peak * peak / mse) : std::numeric_limits<double>::infinity();
}

}  // namespace mvlab
