#include "mvlab/core/random.hpp"

namespace mvlab {

ViewStack gaussian_like(int views, int channels, int height, int width, Rng& rng) {
  ViewStack out(views, channels, height, width);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : out.data()) v = n(rng);
  return out;
}

ViewStack gaussian_like(const ViewStack& shape, Rng& rng) {
  return gaussian_like(shape.views(), shape.channels(), shape.height(), shape.width(), rng);
}

}  // namespace mvlab
