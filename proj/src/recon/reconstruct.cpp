#include "mvlab/recon/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mvlab/core/errors.hpp"

namespace mvlab {

FeedforwardResult fit_feedforward_quads(const ViewStack& targets, const std::vector<Camera>& cams,
                                        const TexturedQuad& layout,
                                        const std::vector<double>& view_weights) {
  if (targets.views() != static_cast<int>(cams.size()))
    throw StructuralError("fit_feedforward_quads: one camera per view required");
  if (targets.channels() != channels::kRgb && targets.channels() != channels::kRgbad)
    throw StructuralError("fit_feedforward_quads: targets must be rgb or RGBAD");
  if (!view_weights.empty() && view_weights.size() != cams.size())
    throw StructuralError("fit_feedforward_quads: one weight per view required");
  const int tw = layout.texture.width(), th = layout.texture.height();
  const std::size_t tpix = static_cast<std::size_t>(tw) * th;
  std::vector<double> num(3 * tpix, 0.0), den(tpix, 0.0);
  for (int v = 0; v < targets.views(); ++v) {
    if (cams[v].width != targets.width() || cams[v].height != targets.height())
      throw StructuralError("fit_feedforward_quads: camera resolution mismatch");
    const double wv = view_weights.empty() ? 1.0 : view_weights[v];
    if (wv == 0.0) continue;
    const QuadCoverage cov = quad_coverage(layout, cams[v]);
    for (int y = 0; y < targets.height(); ++y)
      for (int x = 0; x < targets.width(); ++x) {
        const int texel = cov.texel[static_cast<std::size_t>(y) * targets.width() + x];
        if (texel < 0) continue;
        const double a = targets.channels() == channels::kRgbad
                             ? targets.at(v, channels::kAlpha, y, x)
                             : 1.0;
        const double w = wv * a;
        if (w <= 0.0) continue;
        for (int c = 0; c < 3; ++c) num[c * tpix + texel] += w * targets.at(v, c, y, x);
        den[texel] += w;
      }
  }
  FeedforwardResult out{Image(th, tw, 3), std::vector<unsigned char>(tpix, 0)};
  for (std::size_t j = 0; j < tpix; ++j) {
    if (den[j] <= 0.0) continue;
    out.filled[j] = 1;
    for (int c = 0; c < 3; ++c) out.texture.data()[c * tpix + j] = num[c * tpix + j] / den[j];
  }
  return out;
}

SplatSet lift_splats(const ViewStack& targets, const std::vector<Camera>& cams,
                     const FitConfig& cfg) {
  if (targets.channels() != channels::kRgbad)
    throw StructuralError("lift_splats: targets must be RGBAD");
  if (targets.views() != static_cast<int>(cams.size()))
    throw StructuralError("lift_splats: one camera per view required");
  const int stride = cfg.lift_stride;
  SplatSet out;
  for (int v = 0; v < targets.views(); ++v) {
    const Camera& cam = cams[v];
    if (cam.width != targets.width() || cam.height != targets.height())
      throw StructuralError("lift_splats: camera resolution mismatch");
    const Eigen::Vector3d origin = cam.center();
    for (int y = stride / 2; y < targets.height(); y += stride)
      for (int x = stride / 2; x < targets.width(); x += stride) {
        const double a = targets.at(v, channels::kAlpha, y, x);
        const double z = targets.at(v, channels::kDepth, y, x);
        if (!(a >= cfg.lift_alpha_threshold) || !(z > 0.0)) continue;
        const Eigen::Vector3d p = origin + z * cam.ray_direction(x + 0.5, y + 0.5);
        const double scale = cfg.lift_scale * stride * z / cam.focal;
        Eigen::Vector3d col;
        for (int c = 0; c < 3; ++c) col[c] = std::clamp(targets.at(v, c, y, x), 0.0, 1.0);
        out.add(p, scale, cfg.lift_opacity, col);
      }
  }
  return out;
}

namespace {

// Fragments with the footprint factor g = a / opacity, which stays fixed while
// only opacities and colors change.
struct CachedFragment {
  std::size_t splat;
  double g;
  double z;
};
using ViewFragments = std::vector<std::vector<CachedFragment>>;

std::vector<ViewFragments> cache_fragments(const SplatSet& splats, const std::vector<Camera>& cams) {
  std::vector<ViewFragments> out;
  for (const auto& cam : cams) {
    ViewFragments vf;
    for (const auto& fl : splat_fragments(splats, cam)) {
      auto& dst = vf.emplace_back();
      dst.reserve(fl.size());
      for (const auto& f : fl) dst.push_back({f.splat, f.a / splats.opacities[f.splat], f.z});
    }
    out.push_back(std::move(vf));
  }
  return out;
}

double cached_objective(const SplatSet& splats, const std::vector<ViewFragments>& frags,
                        const std::vector<RenderOutput>& targets, const std::vector<Camera>& cams,
                        const LossWeights& w, std::vector<double>* grad_opacity,
                        std::vector<Eigen::Vector3d>* grad_color) {
  const bool want_grad = grad_opacity || grad_color;
  if (grad_opacity) grad_opacity->assign(splats.size(), 0.0);
  if (grad_color) grad_color->assign(splats.size(), Eigen::Vector3d::Zero());
  const double view_scale = 1.0 / static_cast<double>(cams.size());
  double total = 0.0;
  std::vector<double> a, trans_before, gw;
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const Camera& cam = cams[v];
    const int h = cam.height, wd = cam.width;
    RenderOutput r = RenderOutput::blank(h, wd);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < wd; ++x) {
        double trans = 1.0, depth_acc = 0.0;
        Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
        for (const auto& f : frags[v][static_cast<std::size_t>(y) * wd + x]) {
          const double af = splats.opacities[f.splat] * f.g;
          rgb += af * trans * splats.colors[f.splat];
          depth_acc += af * trans * f.z;
          trans *= 1.0 - af;
        }
        const double alpha = 1.0 - trans;
        for (int c = 0; c < 3; ++c) r.rgb.at(c, y, x) = rgb[c];
        r.alpha.at(0, y, x) = alpha;
        r.depth.at(0, y, x) = depth_acc / std::max(alpha, 1e-6);
      }
    RenderGrad g = RenderGrad::zeros(h, wd);
    total += view_scale * l1_rgbad(r, targets[v], w, want_grad ? &g : nullptr);
    if (!want_grad) continue;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < wd; ++x) {
        const auto& fl = frags[v][static_cast<std::size_t>(y) * wd + x];
        if (fl.empty()) continue;
        const std::size_t n = fl.size();
        a.resize(n);
        trans_before.resize(n);
        gw.resize(n);
        double trans = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
          a[i] = splats.opacities[fl[i].splat] * fl[i].g;
          trans_before[i] = trans;
          trans *= 1.0 - a[i];
        }
        const double alpha = r.alpha.at(0, y, x), depth = r.depth.at(0, y, x);
        Eigen::Vector3d grgb;
        for (int c = 0; c < 3; ++c) grgb[c] = view_scale * g.rgb.at(c, y, x);
        const double galpha = view_scale * g.alpha.at(0, y, x);
        const double gdepth = view_scale * g.depth.at(0, y, x);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& f = fl[i];
          // depth = sum w z / max(alpha, 1e-6)
          gw[i] = grgb.dot(splats.colors[f.splat]) + galpha +
                  (alpha > 1e-6 ? gdepth * (f.z - depth) / alpha : gdepth * f.z / 1e-6);
          if (grad_color) (*grad_color)[f.splat] += a[i] * trans_before[i] * grgb;
        }
        if (!grad_opacity) continue;
        // w_i = a_i T_i; with R_k = g_k a_k + (1 - a_k) R_{k+1}, dL/da_k = T_k (g_k - R_{k+1}).
        double r_next = 0.0;
        for (std::size_t i = n; i-- > 0;) {
          const double g_a = trans_before[i] * (gw[i] - r_next);
          r_next = gw[i] * a[i] + (1.0 - a[i]) * r_next;
          (*grad_opacity)[fl[i].splat] += g_a * fl[i].g;
        }
      }
  }
  return total;
}

}  // namespace

double splat_objective(const SplatSet& splats, const std::vector<RenderOutput>& targets,
                       const std::vector<Camera>& cams, const LossWeights& w,
                       std::vector<double>* grad_opacity, std::vector<Eigen::Vector3d>* grad_color) {
  if (targets.size() != cams.size() || cams.empty())
    throw StructuralError("splat_objective: one target per camera required");
  return cached_objective(splats, cache_fragments(splats, cams), targets, cams, w, grad_opacity,
                          grad_color);
}

SplatSet refine_splats(SplatSet splats, const ViewStack& targets, const std::vector<Camera>& cams,
                       const FitConfig& cfg, std::vector<double>* trace) {
  if (cfg.lift_refine_steps <= 0 || splats.size() == 0) return splats;
  std::vector<RenderOutput> fit_targets;
  for (int v = 0; v < targets.views(); ++v) fit_targets.push_back(from_rgbad(targets, v));
  const std::size_t m = splats.size();
  constexpr double kMaxOpacity = 1.0 - 1e-6;
  std::vector<double> logit(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double o = std::clamp(splats.opacities[i], 1e-6, kMaxOpacity);
    logit[i] = std::log(o / (1.0 - o));
  }
  std::vector<double> m_o(m, 0.0), v_o(m, 0.0);
  std::vector<Eigen::Vector3d> m_c(m, Eigen::Vector3d::Zero()), v_c(m, Eigen::Vector3d::Zero());
  std::vector<double> g_o;
  std::vector<Eigen::Vector3d> g_c;
  const auto frags = cache_fragments(splats, cams);
  for (int t = 1; t <= cfg.lift_refine_steps; ++t) {
    const double loss = cached_objective(splats, frags, fit_targets, cams, cfg.weights, &g_o, &g_c);
    if (!std::isfinite(loss)) throw NumericalError("non-finite splat refinement loss");
    if (trace) trace->push_back(loss);
    const double c1 = 1.0 - std::pow(cfg.beta1, t), c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < m; ++i) {
      const double o = splats.opacities[i];
      const double gl = g_o[i] * o * (1.0 - o);
      if (!std::isfinite(gl) || !g_c[i].allFinite())
        throw NumericalError("non-finite splat refinement gradient");
      m_o[i] = cfg.beta1 * m_o[i] + (1.0 - cfg.beta1) * gl;
      v_o[i] = cfg.beta2 * v_o[i] + (1.0 - cfg.beta2) * gl * gl;
      logit[i] -= cfg.lift_lr_opacity * (m_o[i] / c1) / (std::sqrt(v_o[i] / c2) + cfg.adam_eps);
      splats.opacities[i] = std::clamp(1.0 / (1.0 + std::exp(-logit[i])), 1e-6, kMaxOpacity);
      m_c[i] = cfg.beta1 * m_c[i] + (1.0 - cfg.beta1) * g_c[i];
      v_c[i] = cfg.beta2 * v_c[i] + (1.0 - cfg.beta2) * g_c[i].cwiseAbs2();
      const Eigen::Vector3d step =
          (m_c[i] / c1).array() / ((v_c[i] / c2).cwiseSqrt().array() + cfg.adam_eps);
      splats.colors[i] = (splats.colors[i] - cfg.lift_lr_color * step).cwiseMax(0.0).cwiseMin(1.0);
    }
  }
  return splats;
}

namespace {

ViewStack resize_stack(const ViewStack& x, int height, int width) {
  if (x.height() == height && x.width() == width) return x;
  ViewStack out(x.views(), x.channels(), height, width);
  for (int v = 0; v < x.views(); ++v) out.set_image(v, resize_bilinear(x.image(v), height, width));
  return out;
}

}  // namespace

ReconResult reconstruct_and_render(ReconState state, const ViewStack& targets,
                                   const std::vector<Camera>& cams, const FitConfig& cfg,
                                   const std::vector<Camera>& render_cams, bool contribs) {
  cfg.validate();
  if (cams.empty() || targets.views() != static_cast<int>(cams.size()))
    throw StructuralError("reconstruct_and_render: one camera per target view required");
  const ViewStack fit_targets = resize_stack(targets, cams.front().height, cams.front().width);
  if (cfg.steps_per_denoise > 0) {
    switch (state.phase) {
      case ReconPhase::kNerf:
      case ReconPhase::kMesh:
        state = fit_incremental(std::move(state), fit_targets, cams, cfg);
        break;
      case ReconPhase::kTexture: {
        FeedforwardResult ff = fit_feedforward_quads(fit_targets, cams, state.quad);
        state.quad.texture = std::move(ff.texture);
        state.texel_filled.assign(ff.filled.begin(), ff.filled.end());
        ++state.step_count;
        break;
      }
      case ReconPhase::kSplats:
        state.loss_trace.clear();
        state.splats = refine_splats(lift_splats(fit_targets, cams, cfg), fit_targets, cams, cfg,
                                     &state.loss_trace);
        ++state.step_count;
        break;
    }
  }
  ReconResult out;
  out.renders = render_state(state, render_cams, cfg, contribs);
  out.feedback.views = to_rgbd(out.renders);
  out.feedback.source = FeedbackSource::kReconstruction;
  out.state = std::move(state);
  return out;
}

ReconState initial_state(const WorldModel& world, int volume_resolution) {
  const PrototypeObject& obj = world.prototypes().front().object;
  switch (world.kind()) {
    case PrototypeKind::kQuad:
      return make_quad_state(std::get<TexturedQuad>(obj));
    case PrototypeKind::kVolume: {
      const auto& g = std::get<VolumeGrid>(obj);
      return make_volume_state(volume_resolution, g.lo, g.hi);
    }
    case PrototypeKind::kSplats:
      return make_splat_state();
  }
  return {};
}

ViewStack to_data_channels(const std::vector<RenderOutput>& renders, int data_channels) {
  const ViewStack full = to_rgbad(renders);
  return data_channels == channels::kRgbad ? full : full.leading_channels(data_channels);
}

ReconstructRender make_reconstructor(const WorldModel& world, const FitConfig& cfg,
                                     int volume_resolution, int volume_steps) {
  FitConfig fc = cfg;
  if (world.kind() == PrototypeKind::kVolume) fc.steps_per_denoise = volume_steps;
  if (fc.steps_per_denoise < 1) fc.steps_per_denoise = 1;
  const ReconState init = initial_state(world, volume_resolution);
  const std::vector<Camera> cams = world.cameras();
  const int channels = world.data_channels();
  return [fc, init, cams, channels](const ViewStack& x) {
    const ReconResult r = reconstruct_and_render(init, x, cams, fc, cams);
    return to_data_channels(r.renders, channels);
  };
}

// ---- checkpoint -------------------------------------------------------------

namespace {

constexpr char kMagic[] = "recon-v1";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw StructuralError("cannot open checkpoint for writing: " + path);
  }
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
  }
  void vec3s(const std::vector<Eigen::Vector3d>& v) {
    u64(v.size());
    for (const auto& p : v)
      for (int i = 0; i < 3; ++i) f64(p[i]);
  }
  void image(const Image& img) {
    i64(img.height());
    i64(img.width());
    i64(img.channels());
    raw(img.data().data(), img.size() * sizeof(double));
  }
  void finish() {
    out_.flush();
    if (!out_) throw StructuralError("checkpoint write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw StructuralError("cannot open checkpoint: " + path);
  }
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), n);
    if (!in_) throw StructuralError("truncated checkpoint");
  }
  std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
  std::int64_t i64() { std::int64_t v; raw(&v, sizeof v); return v; }
  double f64() { double v; raw(&v, sizeof v); return v; }
  std::size_t count() {
    const std::uint64_t n = u64();
    if (n > (std::uint64_t{1} << 32)) throw StructuralError("corrupt checkpoint length");
    return n;
  }
  std::vector<double> doubles() {
    std::vector<double> v(count());
    raw(v.data(), v.size() * sizeof(double));
    return v;
  }
  std::vector<Eigen::Vector3d> vec3s() {
    std::vector<Eigen::Vector3d> v(count());
    for (auto& p : v)
      for (int i = 0; i < 3; ++i) p[i] = f64();
    return v;
  }
  Image image() {
    const auto h = i64(), w = i64(), c = i64();
    if (h < 0 || w < 0 || c < 0 || h * w * c > (std::int64_t{1} << 32))
      throw StructuralError("corrupt checkpoint image");
    Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    raw(img.data().data(), img.size() * sizeof(double));
    return img;
  }
  void expect_end() {
    if (in_.peek() != std::ifstream::traits_type::eof())
      throw StructuralError("trailing bytes in checkpoint");
  }

 private:
  std::ifstream in_;
};

}  // namespace

void save_checkpoint(const std::string& path, const ReconState& s) {
  Writer w(path);
  w.raw(kMagic, kMagicLen);
  w.i64(static_cast<int>(s.phase));
  w.i64(s.step_count);
  w.i64(s.empty_surface_warning ? 1 : 0);
  // nerf / mesh field
  w.i64(s.grid.resolution);
  for (int i = 0; i < 3; ++i) w.f64(s.grid.lo[i]);
  for (int i = 0; i < 3; ++i) w.f64(s.grid.hi[i]);
  w.doubles(s.grid.density);
  w.doubles(s.grid.color);
  w.doubles(s.density_logits);
  for (const AdamMoments* m : {&s.density_moments, &s.color_moments}) {
    w.doubles(m->m);
    w.doubles(m->v);
  }
  w.vec3s(s.mesh.vertices);
  w.u64(s.mesh.faces.size());
  for (const auto& f : s.mesh.faces)
    for (int i : f) w.i64(i);
  // texture
  for (const Eigen::Vector3d* v : {&s.quad.center, &s.quad.half_u, &s.quad.half_v})
    for (int i = 0; i < 3; ++i) w.f64((*v)[i]);
  w.image(s.quad.texture);
  w.u64(s.texel_filled.size());
  for (bool b : s.texel_filled) w.i64(b ? 1 : 0);
  // splats
  w.vec3s(s.splats.centers);
  w.doubles(s.splats.scales);
  w.doubles(s.splats.opacities);
  w.vec3s(s.splats.colors);
  w.doubles(s.loss_trace);
  w.finish();
}

ReconState load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[kMagicLen];
  r.raw(magic, kMagicLen);
  if (std::memcmp(magic, kMagic, kMagicLen) != 0) throw StructuralError("not a recon-v1 checkpoint");
  ReconState s;
  const auto phase = r.i64();
  if (phase < 0 || phase > static_cast<int>(ReconPhase::kSplats))
    throw StructuralError("corrupt checkpoint phase");
  s.phase = static_cast<ReconPhase>(phase);
  s.step_count = static_cast<int>(r.i64());
  s.empty_surface_warning = r.i64() != 0;
  s.grid.resolution = static_cast<int>(r.i64());
  for (int i = 0; i < 3; ++i) s.grid.lo[i] = r.f64();
  for (int i = 0; i < 3; ++i) s.grid.hi[i] = r.f64();
  s.grid.density = r.doubles();
  s.grid.color = r.doubles();
  s.density_logits = r.doubles();
  for (AdamMoments* m : {&s.density_moments, &s.color_moments}) {
    m->m = r.doubles();
    m->v = r.doubles();
  }
  s.mesh.vertices = r.vec3s();
  s.mesh.faces.resize(r.count());
  for (auto& f : s.mesh.faces)
    for (int& i : f) i = static_cast<int>(r.i64());
  for (Eigen::Vector3d* v : {&s.quad.center, &s.quad.half_u, &s.quad.half_v})
    for (int i = 0; i < 3; ++i) (*v)[i] = r.f64();
  s.quad.texture = r.image();
  s.texel_filled.resize(r.count());
  for (std::size_t i = 0; i < s.texel_filled.size(); ++i) s.texel_filled[i] = r.i64() != 0;
  s.splats.centers = r.vec3s();
  s.splats.scales = r.doubles();
  s.splats.opacities = r.doubles();
  s.splats.colors = r.vec3s();
  s.loss_trace = r.doubles();
  r.expect_end();
  const std::size_t n = static_cast<std::size_t>(s.grid.resolution) * s.grid.resolution * s.grid.resolution;
  if (s.grid.density.size() != n || s.grid.color.size() != 3 * n ||
      (!s.density_logits.empty() && s.density_logits.size() != n))
    throw StructuralError("checkpoint grid sizes are inconsistent");
  s.mesh.validate();
  return s;
}

}  // namespace mvlab
