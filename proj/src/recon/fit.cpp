#include "mvlab/recon/fit.hpp"

#include <algorithm>
#include <cmath>

#include "mvlab/core/errors.hpp"
#include "mvlab/render/marching_cubes.hpp"
#include "mvlab/render/normals.hpp"

namespace mvlab {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw DomainError("softplus_inverse needs a positive argument");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void sync_density(ReconState& s) {
  for (std::size_t i = 0; i < s.density_logits.size(); ++i)
    s.grid.density[i] = softplus(s.density_logits[i]);
}

}  // namespace

ReconState make_volume_state(int resolution, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                             double init_density, double init_color) {
  ReconState s;
  s.phase = ReconPhase::kNerf;
  s.grid = VolumeGrid(resolution, lo, hi);
  s.density_logits.assign(s.grid.cells(), softplus_inverse(init_density));
  std::ranges::fill(s.grid.color, init_color);
  s.density_moments.resize(s.grid.cells());
  s.color_moments.resize(s.grid.color.size());
  sync_density(s);
  s.grid.validate();
  return s;
}

ReconState make_quad_state(const TexturedQuad& layout) {
  ReconState s;
  s.phase = ReconPhase::kTexture;
  s.quad = layout;
  std::ranges::fill(s.quad.texture.data(), 0.0);
  s.texel_filled.assign(layout.texture.pixels(), false);
  return s;
}

ReconState make_splat_state() {
  ReconState s;
  s.phase = ReconPhase::kSplats;
  return s;
}

void FitConfig::validate() const {
  weights.validate();
  if (steps_per_denoise < 0) throw DomainError("steps_per_denoise must be >= 0");
  for (double v : {lr_density, lr_color, adam_eps, entropy_shell, lift_scale, lift_opacity,
                   lift_lr_opacity, lift_lr_color})
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("fit rates and scales must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw DomainError("moment decay rates must lie in [0, 1)");
  if (alpha_blur_px < 0.0 || erosion_iterations < 0 || lift_stride < 1 || lift_opacity > 1.0 ||
      lift_refine_steps < 0)
    throw DomainError("invalid fit option");
  for (const auto& [f, r] : resolution_schedule)
    if (f < 0.0 || f > 1.0 || r < 1) throw DomainError("invalid resolution schedule entry");
}

int FitConfig::resolution_for(double fraction) const {
  int res = 0;
  for (const auto& [f, r] : resolution_schedule)
    if (fraction >= f) res = r;
  return res;
}

Image gaussian_blur(const Image& img, double radius) {
  if (radius <= 0.0) return img;
  const int half = static_cast<int>(std::ceil(radius));
  const double sigma = 0.5 * radius;
  std::vector<double> k(2 * half + 1);
  for (int i = -half; i <= half; ++i) k[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
  auto pass = [&](const Image& src, bool horizontal) {
    Image dst(src.height(), src.width(), src.channels());
    for (int c = 0; c < src.channels(); ++c)
      for (int y = 0; y < src.height(); ++y)
        for (int x = 0; x < src.width(); ++x) {
          double acc = 0.0, norm = 0.0;
          for (int i = -half; i <= half; ++i) {
            const int yy = horizontal ? y : y + i, xx = horizontal ? x + i : x;
            if (yy < 0 || yy >= src.height() || xx < 0 || xx >= src.width()) continue;
            acc += k[i + half] * src.at(c, yy, xx);
            norm += k[i + half];
          }
          dst.at(c, y, x) = acc / norm;
        }
    return dst;
  };
  return pass(pass(img, true), false);
}

std::vector<RenderOutput> make_fit_targets(const ViewStack& views, double alpha_blur_px) {
  if (views.channels() != channels::kRgbad)
    throw StructuralError("fit targets must be RGBAD views");
  std::vector<RenderOutput> out;
  for (int v = 0; v < views.views(); ++v) {
    RenderOutput t = from_rgbad(views, v);
    t.alpha = gaussian_blur(t.alpha, alpha_blur_px);
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

void check_targets(const std::vector<RenderOutput>& targets, const std::vector<Camera>& cams) {
  if (targets.size() != cams.size() || cams.empty())
    throw StructuralError("need one target per camera");
  for (std::size_t v = 0; v < cams.size(); ++v)
    if (targets[v].height() != cams[v].height || targets[v].width() != cams[v].width)
      throw StructuralError("target resolution does not match its camera");
}

Image foreground_mask(const Image& alpha, int erosion) {
  Image m(alpha.height(), alpha.width(), 1);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = alpha.data()[i] >= 0.5 ? 1.0 : 0.0;
  return erode_mask(m, erosion);
}

void add_scaled(Image& dst, const Image& src, double s) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += s * src.data()[i];
}

// Image-space terms shared by both phases: fills `g` with d/d(render) and returns the parts.
FitLoss image_terms(const RenderOutput& r, const RenderOutput& t, const FitConfig& cfg,
                    double view_scale, RenderGrad& g) {
  FitLoss out;
  const LossWeights& w = cfg.weights;
  if (w.l1 > 0.0) {
    RenderGrad gl = RenderGrad::zeros(r.height(), r.width());
    out.l1 = w.l1 * view_scale * l1_rgbad(r, t, w, &gl);
    add_scaled(g.rgb, gl.rgb, w.l1 * view_scale);
    add_scaled(g.alpha, gl.alpha, w.l1 * view_scale);
    add_scaled(g.depth, gl.depth, w.l1 * view_scale);
  }
  if (w.perceptual > 0.0) {
    Image gp;
    out.perceptual = w.perceptual * view_scale * patch_perceptual(r.rgb, t.rgb, &gp);
    add_scaled(g.rgb, gp, w.perceptual * view_scale);
  }
  return out;
}

}  // namespace

FitLoss volume_objective(const ReconState& state, const std::vector<RenderOutput>& targets,
                         const std::vector<Camera>& cams, const FitConfig& cfg,
                         std::vector<double>* grad_logits, std::vector<double>* grad_color) {
  cfg.validate();
  check_targets(targets, cams);
  const VolumeGrid& grid = state.grid;
  const double step = cfg.step_for(grid);
  RenderOptions ro;
  ro.step = step;
  ro.normal_alpha_threshold = cfg.normal_alpha_threshold;
  const bool want_grad = grad_logits || grad_color;
  std::vector<double> g_density(want_grad ? grid.cells() : 0, 0.0);
  if (grad_color) grad_color->assign(grid.color.size(), 0.0);
  const double view_scale = 1.0 / static_cast<double>(cams.size());
  const LossWeights& w = cfg.weights;
  FitLoss out;

  for (std::size_t v = 0; v < cams.size(); ++v) {
    const Camera& cam = cams[v];
    const RenderOutput& t = targets[v];
    const RenderOutput r = raymarch_volume(grid, cam, ro);
    const double pixels = static_cast<double>(r.alpha.pixels());
    RenderGrad g = RenderGrad::zeros(r.height(), r.width());
    const FitLoss img = image_terms(r, t, cfg, view_scale, g);
    out.l1 += img.l1;
    out.perceptual += img.perceptual;
    if (w.normal_tv > 0.0) {
      const double s = w.normal_tv * view_scale / pixels;
      Image gn(r.height(), r.width(), 3);
      out.normal_tv += s * normal_tv_l15(r.normal, foreground_mask(t.alpha, cfg.erosion_iterations), &gn);
      if (want_grad) {
        for (double& x : gn.data()) x *= s;
        normals_from_depth_backward(r.depth, cam, gn, g.depth, &r.alpha, cfg.normal_alpha_threshold);
      }
    }
    const double es = w.entropy * view_scale / pixels;

    // Per-ray pass: entropy term plus the backward pass through compositing.
    std::vector<Trilinear> tri;
    std::vector<double> att, wgt, taus, trans_before;
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const RaySegment seg = ray_segment(grid, cam, x, y, step);
        const double delta = seg.dt * seg.dir_norm;
        tri.clear();
        att.clear();
        wgt.clear();
        taus.clear();
        trans_before.clear();
        double trans = 1.0, depth_acc = 0.0;
        for (int i = 0; i < seg.samples; ++i) {
          const Trilinear s = trilinear(grid, seg.point(i));
          const double sigma = sample_density(grid, s);
          if (sigma <= 0.0) continue;
          const double a = std::exp(-sigma * delta);
          tri.push_back(s);
          trans_before.push_back(trans);
          att.push_back(a);
          wgt.push_back(trans * (1.0 - a));
          taus.push_back(seg.tau(i));
          depth_acc += wgt.back() * taus.back();
          trans *= a;
        }
        const double alpha = 1.0 - trans;
        const std::size_t n = wgt.size();
        std::vector<double> gw(n, 0.0);
        if (w.entropy > 0.0) {
          RayProfile prof;
          prof.taus = taus;
          prof.delta_tau.assign(n, seg.dt);
          prof.p.resize(n);
          for (std::size_t i = 0; i < n; ++i) prof.p[i] = wgt[i] / seg.dt;
          prof.alpha = alpha;
          std::vector<double> gp;
          double ga = 0.0;
          out.entropy += es * ray_entropy(prof, cfg.entropy_shell, &gp, &ga);
          for (std::size_t i = 0; i < n; ++i) gw[i] += es * (gp[i] / seg.dt + ga);
        }
        if (!want_grad || n == 0) continue;
        Eigen::Vector3d grgb;
        for (int c = 0; c < 3; ++c) grgb[c] = g.rgb.at(c, y, x);
        const double galpha = g.alpha.at(0, y, x), gdepth = g.depth.at(0, y, x);
        for (std::size_t i = 0; i < n; ++i) {
          const Eigen::Vector3d col = sample_color(grid, tri[i]);
          gw[i] += grgb.dot(col) + galpha;
          gw[i] += alpha > 1e-6 ? gdepth * (taus[i] / alpha - depth_acc / (alpha * alpha))
                                : gdepth * taus[i] / 1e-6;
          if (grad_color)
            for (int j = 0; j < 8; ++j) {
              const double s = tri[i].weight[j] * wgt[i];
              if (s == 0.0) continue;
              for (int c = 0; c < 3; ++c) (*grad_color)[3 * tri[i].index[j] + c] += s * grgb[c];
            }
        }
        // w_i = T_i a_i with a_i = 1 - att_i. With R_k = g_k a_k + (1 - a_k) R_{k+1},
        // dL/da_k = T_k (g_k - R_{k+1}).
        double r_next = 0.0;
        for (std::size_t i = n; i-- > 0;) {
          const double a = 1.0 - att[i];
          const double g_a = trans_before[i] * (gw[i] - r_next);
          r_next = gw[i] * a + att[i] * r_next;
          const double g_sigma = g_a * delta * att[i];
          for (int j = 0; j < 8; ++j)
            if (tri[i].weight[j] != 0.0) g_density[tri[i].index[j]] += tri[i].weight[j] * g_sigma;
        }
      }
  }
  out.total = out.l1 + out.perceptual + out.normal_tv + out.entropy;
  if (grad_logits) {
    grad_logits->assign(grid.cells(), 0.0);
    for (std::size_t j = 0; j < grid.cells(); ++j)
      (*grad_logits)[j] = g_density[j] * sigmoid(state.density_logits[j]);
  }
  return out;
}

FitLoss mesh_objective(const ReconState& state, const std::vector<RenderOutput>& targets,
                       const std::vector<Camera>& cams, const FitConfig& cfg,
                       std::vector<double>* grad_color) {
  cfg.validate();
  check_targets(targets, cams);
  if (grad_color) grad_color->assign(state.grid.color.size(), 0.0);
  const VolumeGrid& grid = state.grid;
  MeshRenderOptions mo;
  mo.color_field = [&grid](const Eigen::Vector3d& p) { return sample_color(grid, trilinear(grid, p)); };
  const double view_scale = 1.0 / static_cast<double>(cams.size());
  FitLoss out;
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const RenderOutput r = render_mesh(state.mesh, cams[v], mo);
    RenderGrad g = RenderGrad::zeros(r.height(), r.width());
    const FitLoss img = image_terms(r, targets[v], cfg, view_scale, g);
    out.l1 += img.l1;
    out.perceptual += img.perceptual;
    if (!grad_color) continue;
    const MeshRaster ras = rasterize_mesh(state.mesh, cams[v]);
    for (int y = 0; y < ras.height; ++y)
      for (int x = 0; x < ras.width; ++x) {
        const std::size_t pix = static_cast<std::size_t>(y) * ras.width + x;
        const int f = ras.face[pix];
        if (f < 0) continue;
        const auto& tri = state.mesh.faces[f];
        const Eigen::Vector3d& b = ras.bary[pix];
        const Eigen::Vector3d p = b[0] * state.mesh.vertices[tri[0]] +
                                  b[1] * state.mesh.vertices[tri[1]] +
                                  b[2] * state.mesh.vertices[tri[2]];
        const Trilinear s = trilinear(grid, p);
        for (int j = 0; j < 8; ++j)
          for (int c = 0; c < 3; ++c)
            (*grad_color)[3 * s.index[j] + c] += s.weight[j] * g.rgb.at(c, y, x);
      }
  }
  out.total = out.l1 + out.perceptual;
  return out;
}

namespace {

void check_finite(const std::vector<double>& g, const char* what) {
  for (double v : g)
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite gradient in ") + what);
}

void adam_update(std::vector<double>& params, const std::vector<double>& grad, AdamMoments& mom,
                 double lr, const FitConfig& cfg, int t) {
  const double c1 = 1.0 - std::pow(cfg.beta1, t), c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * grad[i];
    mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    params[i] -= lr * (mom.m[i] / c1) / (std::sqrt(mom.v[i] / c2) + cfg.adam_eps);
  }
}

}  // namespace

ReconState fit_incremental(ReconState state, const ViewStack& targets,
                           const std::vector<Camera>& cams, const FitConfig& cfg) {
  cfg.validate();
  if (state.phase != ReconPhase::kNerf && state.phase != ReconPhase::kMesh)
    throw StructuralError("fit_incremental needs a nerf or mesh phase state");
  const auto fit_targets = make_fit_targets(targets, cfg.alpha_blur_px);
  state.loss_trace.clear();
  std::vector<double> g_logits, g_color;
  for (int it = 0; it < cfg.steps_per_denoise; ++it) {
    FitLoss loss;
    if (state.phase == ReconPhase::kNerf)
      loss = volume_objective(state, fit_targets, cams, cfg, &g_logits, &g_color);
    else
      loss = mesh_objective(state, fit_targets, cams, cfg, &g_color);
    if (!std::isfinite(loss.total)) throw NumericalError("non-finite fitting loss");
    check_finite(g_color, "colors");
    state.loss_trace.push_back(loss.total);
    const int t = ++state.step_count;
    if (state.phase == ReconPhase::kNerf) {
      check_finite(g_logits, "density logits");
      adam_update(state.density_logits, g_logits, state.density_moments, cfg.lr_density, cfg, t);
      sync_density(state);
    }
    adam_update(state.grid.color, g_color, state.color_moments, cfg.lr_color, cfg, t);
    for (double& c : state.grid.color) c = std::clamp(c, 0.0, 1.0);
    if (state.phase == ReconPhase::kMesh && cfg.optimize_vertices && cfg.weights.laplacian > 0.0) {
      // Small regularizer-driven displacement, bounded by a quarter cell per step.
      std::vector<Eigen::Vector3d> gv;
      laplacian_smoothing(state.mesh, &gv);
      const double cap = 0.25 * state.grid.spacing().minCoeff();
      for (std::size_t i = 0; i < gv.size(); ++i) {
        Eigen::Vector3d d = -cfg.vertex_lr * cfg.weights.laplacian * gv[i];
        if (d.norm() > cap) d *= cap / d.norm();
        state.mesh.vertices[i] += d;
      }
    }
  }
  return state;
}

ReconState switch_to_mesh(ReconState state, double iso) {
  if (state.phase != ReconPhase::kNerf) throw StructuralError("switch_to_mesh needs a nerf phase state");
  if (iso <= 0.0) iso = std::log(2.0) / state.grid.spacing().minCoeff();
  TriMesh mesh = marching_cubes(state.grid, iso);
  remove_degenerate_faces(mesh);
  compact_vertices(mesh);
  if (mesh.empty()) {
    state.empty_surface_warning = true;
    return state;
  }
  state.mesh = std::move(mesh);
  state.phase = ReconPhase::kMesh;
  state.empty_surface_warning = false;
  return state;
}

double silhouette_iso(const ReconState& state, const std::vector<Camera>& cams,
                      const FitConfig& cfg) {
  if (state.phase != ReconPhase::kNerf) throw StructuralError("silhouette_iso needs a nerf phase state");
  const double fallback = std::log(2.0) / state.grid.spacing().minCoeff();
  std::size_t target = 0;
  for (const auto& r : render_state(state, cams, cfg))
    for (double a : r.alpha.data()) target += a >= cfg.normal_alpha_threshold;
  const double max_density = *std::ranges::max_element(state.grid.density);
  if (target == 0 || !(max_density > 0.0)) return fallback;
  auto coverage = [&](double iso) {
    TriMesh mesh = marching_cubes(state.grid, iso);
    std::size_t n = 0;
    for (const auto& cam : cams)
      for (int f : rasterize_mesh(mesh, cam).face) n += f >= 0;
    return n;
  };
  // Coverage shrinks as the level rises.
  double lo = std::log(max_density) - std::log(1e4), hi = std::log(max_density);
  for (int it = 0; it < 30; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (coverage(std::exp(mid)) > target)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

ReconState switch_to_mesh(ReconState state, const std::vector<Camera>& cams, const FitConfig& cfg) {
  const double iso = cfg.mesh_iso > 0.0 ? cfg.mesh_iso : silhouette_iso(state, cams, cfg);
  return switch_to_mesh(std::move(state), iso);
}

std::vector<RenderOutput> render_state(const ReconState& state, const std::vector<Camera>& cams,
                                       const FitConfig& cfg, bool contribs) {
  switch (state.phase) {
    case ReconPhase::kNerf: {
      RenderOptions ro;
      ro.step = cfg.step_for(state.grid);
      ro.contribs = contribs;
      ro.normal_alpha_threshold = cfg.normal_alpha_threshold;
      return raymarch_views(state.grid, cams, ro);
    }
    case ReconPhase::kMesh: {
      MeshRenderOptions mo;
      const VolumeGrid& grid = state.grid;
      mo.color_field = [&grid](const Eigen::Vector3d& p) {
        return sample_color(grid, trilinear(grid, p));
      };
      mo.contribs = contribs;
      return render_mesh_views(state.mesh, cams, mo);
    }
    case ReconPhase::kTexture: {
      std::vector<RenderOutput> out;
      for (const auto& cam : cams) {
        out.push_back(render_quad(state.quad, cam));
        if (contribs) {
          RenderOutput& r = out.back();
          r.contribs.assign(r.alpha.pixels(), {});
          for (std::size_t i = 0; i < r.alpha.pixels(); ++i)
            if (r.alpha.data()[i] > 0.0) r.contribs[i].push_back({1.0, r.depth.data()[i]});
        }
      }
      return out;
    }
    case ReconPhase::kSplats: {
      SplatOptions so;
      so.contribs = contribs;
      return composite_views(state.splats, cams, so);
    }
  }
  return {};
}

GradientCheck finite_difference_check(const ReconState& state,
                                      const std::vector<RenderOutput>& targets,
                                      const std::vector<Camera>& cams, const FitConfig& cfg,
                                      const std::vector<std::size_t>& params, double h) {
  std::vector<double> g_logits, g_color;
  volume_objective(state, targets, cams, cfg, &g_logits, &g_color);
  const std::size_t cells = state.grid.cells();
  RenderOptions ro;
  ro.step = cfg.step_for(state.grid);
  auto masks = [&](const ReconState& s) {
    std::vector<bool> m;
    for (const auto& cam : cams) {
      const RenderOutput r = raymarch_volume(s.grid, cam, ro);
      for (double a : r.alpha.data()) m.push_back(a >= cfg.normal_alpha_threshold);
    }
    return m;
  };
  auto perturbed = [&](std::size_t p, double delta) {
    ReconState s = state;
    if (p < cells) {
      s.density_logits[p] += delta;
      s.grid.density[p] = softplus(s.density_logits[p]);
    } else {
      s.grid.color[p - cells] += delta;
    }
    return s;
  };
  GradientCheck out;
  for (std::size_t p : params) {
    if (p >= cells + state.grid.color.size()) throw LookupError("gradient check parameter out of range");
    const ReconState plus = perturbed(p, h), minus = perturbed(p, -h);
    if (p < cells && masks(plus) != masks(minus)) {
      out.nonsmooth.push_back(p);
      continue;
    }
    const double f = (volume_objective(plus, targets, cams, cfg).total -
                      volume_objective(minus, targets, cams, cfg).total) / (2.0 * h);
    const double a = p < cells ? g_logits[p] : g_color[p - cells];
    out.params.push_back(p);
    out.analytic.push_back(a);
    out.numeric.push_back(f);
    out.max_rel_error = std::max(out.max_rel_error,
                                 std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-8}));
  }
  return out;
}

}  // namespace mvlab
