#include "mvlab/core/view_stack.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvlab/core/errors.hpp"

namespace mvlab {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) throw StructuralError("Image: negative dimension");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

std::span<double> Image::channel(int c) {
  return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * pixels(), pixels());
}

std::span<const double> Image::channel(int c) const {
  return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * pixels(), pixels());
}

bool Image::same_shape(const Image& other) const {
  return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
}

ViewStack::ViewStack(int views, int channels, int height, int width, double fill)
    : views_(views), channels_(channels), height_(height), width_(width) {
  if (views < 0 || channels < 0 || height < 0 || width < 0)
    throw StructuralError("ViewStack: negative dimension");
  data_.assign(static_cast<std::size_t>(views) * channels * height * width, fill);
}

std::span<double> ViewStack::view(int v) {
  return std::span<double>(data_).subspan(v * view_size(), view_size());
}

std::span<const double> ViewStack::view(int v) const {
  return std::span<const double>(data_).subspan(v * view_size(), view_size());
}

std::span<double> ViewStack::plane(int v, int c) {
  const std::size_t n = static_cast<std::size_t>(height_) * width_;
  return std::span<double>(data_).subspan(index(v, c, 0, 0), n);
}

std::span<const double> ViewStack::plane(int v, int c) const {
  const std::size_t n = static_cast<std::size_t>(height_) * width_;
  return std::span<const double>(data_).subspan(index(v, c, 0, 0), n);
}

Image ViewStack::image(int v) const {
  Image img(height_, width_, channels_);
  auto src = view(v);
  std::copy(src.begin(), src.end(), img.data().begin());
  return img;
}

void ViewStack::set_image(int v, const Image& img) {
  if (img.height() != height_ || img.width() != width_ || img.channels() != channels_)
    throw StructuralError("ViewStack::set_image: shape mismatch");
  auto src = img.data();
  std::copy(src.begin(), src.end(), view(v).begin());
}

bool ViewStack::same_shape(const ViewStack& other) const {
  return views_ == other.views_ && channels_ == other.channels_ && height_ == other.height_ &&
         width_ == other.width_;
}

bool ViewStack::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ViewStack ViewStack::leading_channels(int count) const {
  if (count > channels_) throw StructuralError("leading_channels: not enough channels");
  ViewStack out(views_, count, height_, width_);
  for (int v = 0; v < views_; ++v)
    for (int c = 0; c < count; ++c) {
      auto src = plane(v, c);
      std::copy(src.begin(), src.end(), out.plane(v, c).begin());
    }
  return out;
}

ViewStack& ViewStack::operator+=(const ViewStack& other) {
  require_same_shape(*this, other, "ViewStack +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

ViewStack& ViewStack::operator-=(const ViewStack& other) {
  require_same_shape(*this, other, "ViewStack -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

ViewStack& ViewStack::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

void require_same_shape(const ViewStack& a, const ViewStack& b, std::string_view what) {
  if (!a.same_shape(b)) {
    std::ostringstream msg;
    msg << what << ": shape mismatch (" << a.views() << "x" << a.channels() << "x" << a.height()
        << "x" << a.width() << " vs " << b.views() << "x" << b.channels() << "x" << b.height()
        << "x" << b.width() << ")";
    throw StructuralError(msg.str());
  }
}

void require_same_shape(const Image& a, const Image& b, std::string_view what) {
  if (!a.same_shape(b)) {
    std::ostringstream msg;
    msg << what << ": shape mismatch (" << a.channels() << "x" << a.height() << "x" << a.width()
        << " vs " << b.channels() << "x" << b.height() << "x" << b.width() << ")";
    throw StructuralError(msg.str());
  }
}

ViewStack axpby(double a, const ViewStack& x, double b, const ViewStack& y) {
  require_same_shape(x, y, "axpby");
  ViewStack out = x;
  auto o = out.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * o[i] + b * yd[i];
  return out;
}

double max_abs_diff(const ViewStack& a, const ViewStack& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double mean_abs_diff(const ViewStack& a, const ViewStack& b) {
  require_same_shape(a, b, "mean_abs_diff");
  if (a.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double squared_norm(const ViewStack& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

Image downsample2(const Image& img) {
  const int h = img.height() / 2;
  const int w = img.width() / 2;
  Image out(h, w, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(c, y, x) = 0.25 * (img.at(c, 2 * y, 2 * x) + img.at(c, 2 * y + 1, 2 * x) +
                                  img.at(c, 2 * y, 2 * x + 1) + img.at(c, 2 * y + 1, 2 * x + 1));
  return out;
}

Image resize_bilinear(const Image& img, int height, int width) {
  if (img.height() == height && img.width() == width) return img;
  Image out(height, width, img.channels());
  const double sy = static_cast<double>(img.height()) / height;
  const double sx = static_cast<double>(img.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double tx = fx - x0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1 - tx) * img.at(c, y0, x0) + tx * img.at(c, y0, x1);
        const double bot = (1 - tx) * img.at(c, y1, x0) + tx * img.at(c, y1, x1);
        out.at(c, y, x) = (1 - ty) * top + ty * bot;
      }
    }
  }
  return out;
}

Image box_resize(const Image& img, int height, int width) {
  if (img.height() == height && img.width() == width) return img;
  if (height <= 0 || width <= 0 || img.height() % height != 0 || img.width() % width != 0)
    throw StructuralError("box_resize: target must divide the source resolution");
  const int fy = img.height() / height;
  const int fx = img.width() / width;
  const double norm = 1.0 / (fy * fx);
  Image out(height, width, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double s = 0.0;
        for (int dy = 0; dy < fy; ++dy)
          for (int dx = 0; dx < fx; ++dx) s += img.at(c, y * fy + dy, x * fx + dx);
        out.at(c, y, x) = s * norm;
      }
  return out;
}

}  // namespace mvlab
