#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/metrics/losses.hpp"
#include "mvlab/world/world_model.hpp"

namespace mvlab {

struct ModeDistance {
  double distance = 0.0;
  int id = 0;
};

// Closest prototype by mean abs difference to its data render; ties go to the lowest id.
ModeDistance mode_distance(const ViewStack& x, const WorldModel& world);

// Maps views to the re-render of the best-fit reconstruction of those views,
// in the same layout.
using ReconstructRender = std::function<ViewStack(const ViewStack& views)>;

// l1_rgbad between x and the re-render of its reconstruction.
double cross_view_consistency(const ViewStack& x, const ReconstructRender& reconstruct,
                              const LossWeights& w = {});

struct MannWhitney {
  double u = 0.0;          // U statistic of the first sample
  double z = 0.0;          // normal approximation with tie correction and continuity correction
  double p_less = 1.0;     // one-sided: first sample tends to be smaller
  double p_greater = 1.0;  // one-sided: first sample tends to be larger
  double p_two_sided = 1.0;
};

MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b);

double median(std::span<const double> values);
// Interquartile range with linear interpolation between order statistics.
double iqr(std::span<const double> values);

// Flat JSON object name -> value, keys sorted; non-finite values become null.
std::string metrics_to_json(const std::map<std::string, double>& metrics);

}  // namespace mvlab
