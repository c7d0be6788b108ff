#include "mvlab/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <vector>

#include "mvlab/core/errors.hpp"

namespace mvlab {

ModeDistance mode_distance(const ViewStack& x, const WorldModel& world) {
  std::vector<int> ids;
  for (const auto& p : world.prototypes()) ids.push_back(p.id);
  std::ranges::sort(ids);
  ModeDistance best{std::numeric_limits<double>::infinity(), ids.front()};
  for (int id : ids) {
    const double d = mean_abs_diff(x, world.data(id));
    if (d < best.distance) best = {d, id};
  }
  return best;
}

double cross_view_consistency(const ViewStack& x, const ReconstructRender& reconstruct,
                              const LossWeights& w) {
  const ViewStack rerender = reconstruct(x);
  return l1_rgbad(rerender, x, w);
}

MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw StructuralError("mann_whitney_u needs two non-empty samples");
  struct Item {
    double value;
    int group;
  };
  std::vector<Item> all;
  for (double v : a) all.push_back({v, 0});
  for (double v : b) all.push_back({v, 1});
  std::ranges::sort(all, {}, &Item::value);
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  double rank_sum = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].value == all[i].value) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].group == 0) rank_sum += avg_rank;
    i = j;
  }
  MannWhitney r;
  r.u = rank_sum - n1 * (n1 + 1.0) / 2.0;
  const double mean = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return r;  // all values tied
  const double sd = std::sqrt(var);
  auto upper_tail = [](double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); };
  // P(U <= u) and P(U >= u) with a half-unit continuity correction.
  r.z = (r.u - mean) / sd;
  r.p_less = 1.0 - upper_tail((r.u + 0.5 - mean) / sd);
  r.p_greater = upper_tail((r.u - 0.5 - mean) / sd);
  r.p_two_sided = std::min(1.0, 2.0 * std::min(r.p_less, r.p_greater));
  return r;
}

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw StructuralError("quantile of an empty sample");
  std::ranges::sort(v);
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

double median(std::span<const double> values) {
  return quantile({values.begin(), values.end()}, 0.5);
}

double iqr(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  return quantile(v, 0.75) - quantile(v, 0.25);
}

std::string metrics_to_json(const std::map<std::string, double>& metrics) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metrics) {
    if (std::isfinite(v))
      j[k] = v;
    else
      j[k] = nullptr;
  }
  return j.dump(2);
}

}  // namespace mvlab
