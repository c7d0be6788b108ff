#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "mvlab/core/errors.hpp"
#include "mvlab/diffusion/denoising_loss.hpp"
#include "mvlab/diffusion/sampler.hpp"
#include "mvlab/world/bayes.hpp"
#include "mvlab/world/presets.hpp"
#include "mvlab/world/world_io.hpp"

using namespace mvlab;

namespace {

const NoiseSchedule kSched = NoiseSchedule::variance_preserving();

TexturedQuad flat_quad(double r, double g, double b, double offset = 0.0) {
  TexturedQuad q;
  q.center = {offset, 0.0, 0.0};
  q.half_u = {0.6, 0.0, 0.0};
  q.half_v = {0.0, 0.6, 0.0};
  q.texture = Image(4, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      q.texture.at(0, y, x) = r;
      q.texture.at(1, y, x) = g;
      q.texture.at(2, y, x) = b;
    }
  return q;
}

// Small quad world with arbitrary colors, for tests that need cheap renders.
WorldModel small_world(int k_count, int res = 8, double noise = 0.0) {
  std::vector<Prototype> protos;
  for (int k = 0; k < k_count; ++k)
    protos.push_back({k, flat_quad(0.1 + 0.2 * k, 0.8 - 0.15 * k, 0.3 + 0.1 * (k % 2)),
                      1.0 / k_count, k % 2 == 0 ? "even" : "odd"});
  // Make priors sum to one exactly.
  double rest = 1.0;
  for (int k = 0; k + 1 < k_count; ++k) rest -= protos[k].prior;
  protos.back().prior = rest;
  return WorldModel("small", std::move(protos), orbit_cameras(2, 3.0, 0.0, -20.0, 40.0, 40.0, res, res),
                    noise);
}

ViewStack noisy(const ViewStack& x, double t, std::uint64_t seed) {
  Rng rng(seed);
  return perturb(x, t, gaussian_like(x, rng), kSched);
}

}  // namespace

TEST(World, RejectsInvalidConstruction) {
  auto cams = orbit_cameras(2, 3.0, 0.0, 0.0, 30.0, 40.0, 8, 8);
  EXPECT_THROW(WorldModel("x", {{0, flat_quad(1, 1, 1), 1.0, ""}}, cams), StructuralError);
  EXPECT_THROW(WorldModel("x", {{0, flat_quad(1, 1, 1), 0.5, ""}, {1, flat_quad(0, 0, 0), 0.4, ""}},
                          cams),
               DomainError);
  EXPECT_THROW(WorldModel("x", {{0, flat_quad(1, 1, 1), 0.5, ""}, {1, flat_quad(0, 0, 0), 0.5, ""}},
                          {cams[0]}),
               StructuralError);
  EXPECT_THROW(render_world(small_world(2), 7), LookupError);
}

TEST(World, RenderDeterministicAndWhite) {
  auto cams = orbit_cameras(3, 3.0, 10.0, -20.0, 20.0, 40.0, 16, 16);
  WorldModel w("white", {{0, flat_quad(1, 1, 1), 0.5, ""}, {1, flat_quad(0.2, 0.2, 0.2), 0.5, ""}},
               cams);
  const ViewStack a = render_world(w, 0);
  WorldModel w2("white", w.prototypes(), cams);
  EXPECT_EQ(a, render_world(w2, 0));
  int fg = 0;
  for (int v = 0; v < a.views(); ++v)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (a.at(v, channels::kAlpha, y, x) > 0.5) {
          ++fg;
          for (int c = 0; c < 3; ++c) EXPECT_EQ(a.at(v, c, y, x), 1.0);
        }
  EXPECT_GT(fg, 100);
}

// Silhouettes against an independent point-in-object rasterizer at 64^2.
TEST(World, SilhouetteMatchesOracle) {
  const auto cams = orbit_cameras(2, 3.0, 15.0, -35.0, 50.0, 40.0, 64, 64);
  TexturedQuad q = flat_quad(0.5, 0.5, 0.5);
  q.half_u = {0.7, 0.0, 0.3};
  constexpr int kN = 48;
  VolumeGrid box(kN, Eigen::Vector3d::Constant(-1.0), Eigen::Vector3d::Constant(1.0));
  const double half = 0.5;
  double last_inside = 0.0;
  for (int z = 0; z < kN; ++z)
    for (int y = 0; y < kN; ++y)
      for (int x = 0; x < kN; ++x) {
        const Eigen::Vector3d p = box.position(x, y, z);
        if (p.cwiseAbs().maxCoeff() <= half) {
          box.density[box.index(x, y, z)] = 5000.0;
          last_inside = std::max(last_inside, p.x());
        }
        for (int c = 0; c < 3; ++c) box.color[3 * box.index(x, y, z) + c] = 0.5;
      }
  // Trilinear density ramps to zero over the next cell; at this density the
  // ray saturates close to the far end of the ramp.
  const double box_half = last_inside + 0.95 * box.spacing().x();

  for (int which = 0; which < 2; ++which) {
    PrototypeObject obj = which == 0 ? PrototypeObject(q) : PrototypeObject(box);
    WorldModel w("sil", {{0, obj, 0.5, ""}, {1, obj, 0.5, ""}}, cams);
    const ViewStack r = render_world(w, 0);
    for (int v = 0; v < 2; ++v) {
      int inter = 0, uni = 0;
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
          const Eigen::Vector3d o = cams[v].center();
          const Eigen::Vector3d d = cams[v].ray_direction(x + 0.5, y + 0.5);
          bool hit = false;
          if (which == 0) {
            const Eigen::Vector3d n = q.half_u.cross(q.half_v);
            const double tau = n.dot(q.center - o) / n.dot(d);
            const Eigen::Vector3d rel = o + tau * d - q.center;
            hit = tau > 0 && std::abs(rel.dot(q.half_u)) <= q.half_u.squaredNorm() &&
                  std::abs(rel.dot(q.half_v)) <= q.half_v.squaredNorm();
          } else {
            double t0 = -1e9, t1 = 1e9;
            for (int a = 0; a < 3; ++a) {
              const double ta = (-box_half - o[a]) / d[a], tb = (box_half - o[a]) / d[a];
              t0 = std::max(t0, std::min(ta, tb));
              t1 = std::min(t1, std::max(ta, tb));
            }
            // Require a chord long enough to be opaque at this density.
            hit = t1 - t0 > 1e-3;
          }
          const bool rendered = r.at(v, channels::kAlpha, y, x) > 0.5;
          inter += hit && rendered;
          uni += hit || rendered;
        }
      ASSERT_GT(uni, 0);
      EXPECT_GT(static_cast<double>(inter) / uni, 0.99) << "object " << which << " view " << v;
    }
  }
}

TEST(Posterior, SymmetricAndConcentrating) {
  WorldModel w = small_world(2);
  const ViewStack mid = 0.5 * (w.data(0) + w.data(1));
  const double t = 0.5;
  const ViewStack xt = kSched.alpha(t) * mid;
  const auto wts = posterior_weights(xt, t, kSched, w);
  EXPECT_NEAR(wts[0], 0.5, 1e-12);
  EXPECT_NEAR(wts[1], 0.5, 1e-12);

  const double t_small = kSched.time_for_sigma(1e-3);
  const ViewStack x1 = kSched.alpha(t_small) * w.data(1);
  EXPECT_NEAR(posterior_weights(x1, t_small, kSched, w)[1], 1.0, 1e-12);
}

TEST(Posterior, MatchesDirectEvaluation) {
  WorldModel w = small_world(4, 2);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const double t = 0.3 + 0.5 * uniform01(rng);
    const ViewStack xt = gaussian_like(w.data(0), rng) * 0.3 + w.data(trial % 4);
    FeedbackPacket fb{w.feedback_target(trial % 3), FeedbackSource::kReconstruction};
    for (std::size_t i = 0; i < fb.views.size(); ++i) fb.views[i] += 0.1 * uniform01(rng);
    const double rho = 0.5 + uniform01(rng);
    const auto got = posterior_weights(xt, t, kSched, w, &fb, rho);
    const double a = kSched.alpha(t), s = kSched.sigma(t);
    std::vector<double> direct(4);
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
      double p = w.prototypes()[k].prior;
      for (std::size_t i = 0; i < xt.size(); ++i) {
        const double d = xt[i] - a * w.data(k)[i];
        p *= std::exp(-d * d / (2 * s * s)) / std::sqrt(2 * M_PI * s * s);
      }
      const double m = static_cast<double>(fb.views.size());
      double e = 0.0;
      for (std::size_t i = 0; i < fb.views.size(); ++i) {
        const double d = fb.views[i] - w.feedback_target(k)[i];
        e += d * d;
      }
      p *= std::exp(-e / (2 * rho * rho * m));
      direct[k] = p;
      total += p;
    }
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      EXPECT_NEAR(got[k], direct[k] / total, 1e-10 * std::max(direct[k] / total, 1e-300));
      EXPECT_GE(got[k], 0.0);
      sum += got[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Posterior, PriorScalingInvariance) {
  WorldModel w = small_world(3, 4);
  auto protos = w.prototypes();
  protos[0].prior = 0.2;
  protos[1].prior = 0.3;
  protos[2].prior = 0.5;
  WorldModel a("a", protos, w.cameras());
  const ViewStack xt = noisy(a.data(1), 0.6, 3);
  // Conditioning on a subset is prior restriction plus renormalization.
  const auto full = posterior_weights(xt, 0.6, kSched, a);
  const auto even = posterior_weights(xt, 0.6, kSched, a, nullptr, 0.1, "even");
  EXPECT_EQ(even[1], 0.0);
  EXPECT_NEAR(even[0], full[0] / (full[0] + full[2]), 1e-12);
  EXPECT_NEAR(even[2], full[2] / (full[0] + full[2]), 1e-12);
  EXPECT_THROW(posterior_weights(xt, 0.6, kSched, a, nullptr, 0.1, "none"), LookupError);
}

TEST(Posterior, NoOverflowAtTinySigma) {
  WorldModel w = make_world_preset("bimodal-splat", {.resolution = 64, .view_noise = 0.0});
  const double t = kSched.time_for_sigma(1e-4);
  const ViewStack xt = noisy(w.data(0), t, 9);
  const auto wts = posterior_weights(xt, t, kSched, w);
  EXPECT_TRUE(std::isfinite(wts[0]) && std::isfinite(wts[1]));
  EXPECT_NEAR(wts[0], 1.0, 1e-12);
  ViewStack bad = xt;
  bad[3] = std::nan("");
  EXPECT_THROW(posterior_weights(bad, t, kSched, w), DomainError);
}

TEST(BayesDenoise, SingleEffectivePrototype) {
  WorldModel base = small_world(2);
  auto protos = base.prototypes();
  protos[1].object = protos[0].object;
  WorldModel w("same", protos, base.cameras());
  Rng rng(1);
  const ViewStack xt = gaussian_like(w.data(0), rng);
  EXPECT_LT(max_abs_diff(bayes_denoise(xt, 0.7, kSched, w), w.data(0)), 1e-15);
  EXPECT_LT(max_abs_diff(bayes_denoise(xt, 0.7, kSched, w, DenoiseScope::kJoint), w.data(0)), 1e-15);
}

TEST(BayesDenoise, ConvexHullPixelwise) {
  WorldModel w = make_world_preset("tetra-4", {.resolution = 12});
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    for (auto scope : {DenoiseScope::kPerView, DenoiseScope::kJoint}) {
      const ViewStack out = bayes_denoise(noisy(w.data(seed % 4), 0.4, seed), 0.4, kSched, w, scope);
      for (std::size_t i = 0; i < out.size(); ++i) {
        double lo = 1e9, hi = -1e9;
        for (int k = 0; k < 4; ++k) {
          lo = std::min(lo, w.data(k)[i]);
          hi = std::max(hi, w.data(k)[i]);
        }
        EXPECT_GE(out[i], lo - 1e-12);
        EXPECT_LE(out[i], hi + 1e-12);
      }
    }
}

TEST(BayesDenoise, PerViewDisagreesOnMixedViews) {
  WorldModel w = make_world_preset("bimodal-texture");
  ViewStack x = w.data(0);
  for (int v = 1; v < w.views(); v += 2)
    std::ranges::copy(w.data(1).view(v), x.view(v).begin());
  const double t = 0.3;
  const ViewStack xt = kSched.alpha(t) * x;
  std::vector<int> argmax;
  for (int v = 0; v < w.views(); ++v) {
    const auto wts = posterior_weights(xt, t, kSched, w, nullptr, 0.1, {}, v);
    argmax.push_back(wts[1] > wts[0] ? 1 : 0);
  }
  EXPECT_EQ(argmax, (std::vector<int>{0, 1, 0, 1}));
  const ViewStack out = bayes_denoise(xt, t, kSched, w);
  double disagreement = 0.0;
  for (std::size_t i = 0; i < out.view_size(); ++i)
    disagreement += std::abs(out.view(0)[i] - w.data(1).view(0)[i]) +
                    std::abs(out.view(1)[i] - w.data(0).view(1)[i]);
  EXPECT_GT(disagreement, 1.0);
}

TEST(BayesDenoise, JointMinimizesDiffusionLoss) {
  WorldModel w = make_world_preset("tetra-4", {.resolution = 8, .view_noise = 0.05});
  CleanSampler data = [&](Rng& rng) { return w.sample(rng); };
  const ViewStack mean = w.mean_data();
  std::vector<std::pair<std::string, Denoiser>> candidates = {
      {"joint", [&](const ViewStack& x, double t) {
         return bayes_denoise(x, t, kSched, w, DenoiseScope::kJoint);
       }},
      {"per_view", [&](const ViewStack& x, double t) { return bayes_denoise(x, t, kSched, w); }},
      {"constant", [&](const ViewStack&, double) { return mean; }},
  };
  std::vector<double> losses;
  for (auto& [name, d] : candidates)
    losses.push_back(diffusion_loss(d, data, kSched, 600, LossWeighting::kUnit, 42));
  EXPECT_LT(losses[0], losses[1]);
  EXPECT_LT(losses[0], losses[2]);
}

TEST(Augmented, FeedbackDominanceAndLimits) {
  WorldModel w = make_world_preset("bimodal-texture");
  const double t = 0.5;
  const ViewStack xt = noisy(w.data(0), t, 11);
  FeedbackPacket fb{w.feedback_target(1), FeedbackSource::kReconstruction};
  const ViewStack aug = bayes_denoise_augmented(xt, t, kSched, w, fb, 1e-3);
  for (int v = 0; v < w.views(); ++v) {
    const auto wts = posterior_weights(xt, t, kSched, w, &fb, 1e-3, {}, v);
    EXPECT_GT(wts[1], wts[0]);
  }
  EXPECT_LT(max_abs_diff(aug, w.data(1)), 1e-9);

  const ViewStack per_view = bayes_denoise(xt, t, kSched, w);
  const auto zero = FeedbackPacket::zero(w.views(), w.height(), w.width());
  EXPECT_EQ(bayes_denoise_augmented(xt, t, kSched, w, zero), per_view);
  // Near the decision boundary so the feedback term actually matters.
  const ViewStack xb = kSched.alpha(0.95) * 0.5 * (w.data(0) + w.data(1));
  EXPECT_LT(max_abs_diff(bayes_denoise_augmented(xb, 0.95, kSched, w, fb, 1e6),
                         bayes_denoise(xb, 0.95, kSched, w)),
            1e-6);
  EXPECT_THROW(bayes_denoise_augmented(xt, t, kSched, w, fb, 0.0), DomainError);
}

TEST(Feedback, PacketValidation) {
  FeedbackPacket z = FeedbackPacket::zero(2, 4, 4);
  EXPECT_NO_THROW(z.validate());
  z.views[0] = 1.0;
  EXPECT_THROW(z.validate(), DomainError);
  FeedbackPacket r{ViewStack(2, 4, 4, 4), FeedbackSource::kReconstruction};
  r.views.at(1, channels::kFeedbackDepth, 2, 2) = -0.5;
  EXPECT_THROW(r.validate(), DomainError);
  FeedbackPacket bad{ViewStack(2, 3, 4, 4), FeedbackSource::kReconstruction};
  EXPECT_THROW(bad.validate(), StructuralError);
}

TEST(WorldIo, Base64RoundTrip) {
  for (int n = 0; n < 7; ++n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(std::ldexp(1.0 + i, -i) * (i % 2 ? -1 : 1) / 3.0);
    EXPECT_EQ(decode_doubles(encode_doubles(v)), v);
  }
  EXPECT_THROW(decode_doubles("AAA"), StructuralError);
}

TEST(WorldIo, PresetsRoundTripBitExact) {
  for (const auto& name : world_preset_names()) {
    WorldModel w = make_world_preset(name, {.resolution = 16});
    const std::string text = world_to_json(w);
    EXPECT_NE(text.find("\"world-v1\""), std::string::npos);
    WorldModel back = world_from_json(text);
    EXPECT_EQ(back.size(), w.size());
    EXPECT_EQ(back.view_noise(), w.view_noise());
    for (int k = 0; k < w.size(); ++k) EXPECT_EQ(back.render(k), w.render(k)) << name;
    EXPECT_EQ(world_to_json(back), text);
  }
  EXPECT_THROW(world_from_json("{\"schema\": \"world-v0\"}"), StructuralError);
  EXPECT_THROW(make_world_preset("nope"), LookupError);
}

TEST(Presets, Shapes) {
  WorldModel tex = make_world_preset("bimodal-texture");
  EXPECT_EQ(tex.data_channels(), 3);
  EXPECT_EQ(tex.condition_labels(), (std::vector<std::string>{"a", "b"}));
  WorldModel splat = make_world_preset("bimodal-splat", {.resolution = 32});
  EXPECT_EQ(splat.data_channels(), 5);
  EXPECT_EQ(splat.width(), 32);
  // The two splat prototypes are mirror images under a mirror-symmetric rig:
  // view v of one equals the flipped view V-1-v of the other.
  const ViewStack& a = splat.render(0);
  const ViewStack& b = splat.render(1);
  double err = 0.0;
  const int n = splat.views();
  for (int v = 0; v < n; ++v)
    for (int c = 0; c < 5; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
          err = std::max(err, std::abs(a.at(v, c, y, x) - b.at(n - 1 - v, c, y, 31 - x)));
  EXPECT_LT(err, 1e-9);
  EXPECT_GT(mean_abs_diff(a, b), 0.05);
}
