#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace mvlab {

// Channel layouts used across the project.
namespace channels {
inline constexpr int kRed = 0;
inline constexpr int kGreen = 1;
inline constexpr int kBlue = 2;
// RGBAD stacks: rgb, alpha, depth.
inline constexpr int kAlpha = 3;
inline constexpr int kDepth = 4;
inline constexpr int kRgbad = 5;
// RGBD feedback packets: rgb, depth.
inline constexpr int kFeedbackDepth = 3;
inline constexpr int kRgbd = 4;
inline constexpr int kRgb = 3;
}  // namespace channels

// Planar single image, layout [channel][row][col].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<double> channel(int c);
  std::span<const double> channel(int c) const;
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Image& other) const;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// V per-camera images sharing one channel layout, layout [view][channel][row][col].
class ViewStack {
 public:
  ViewStack() = default;
  ViewStack(int views, int channels, int height, int width, double fill = 0.0);

  int views() const { return views_; }
  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  std::size_t view_size() const {
    return static_cast<std::size_t>(channels_) * height_ * width_;
  }
  bool empty() const { return data_.empty(); }

  double& at(int v, int c, int y, int x) { return data_[index(v, c, y, x)]; }
  double at(int v, int c, int y, int x) const { return data_[index(v, c, y, x)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> view(int v);
  std::span<const double> view(int v) const;
  std::span<double> plane(int v, int c);
  std::span<const double> plane(int v, int c) const;

  Image image(int v) const;
  void set_image(int v, const Image& img);

  bool same_shape(const ViewStack& other) const;
  bool all_finite() const;

  // Keeps the first `count` channels of every view.
  ViewStack leading_channels(int count) const;

  ViewStack& operator+=(const ViewStack& other);
  ViewStack& operator-=(const ViewStack& other);
  ViewStack& operator*=(double s);

  friend ViewStack operator+(ViewStack a, const ViewStack& b) { return a += b; }
  friend ViewStack operator-(ViewStack a, const ViewStack& b) { return a -= b; }
  friend ViewStack operator*(ViewStack a, double s) { return a *= s; }
  friend ViewStack operator*(double s, ViewStack a) { return a *= s; }
  friend bool operator==(const ViewStack& a, const ViewStack& b) = default;

 private:
  std::size_t index(int v, int c, int y, int x) const {
    return ((static_cast<std::size_t>(v) * channels_ + c) * height_ + y) * width_ + x;
  }

  int views_ = 0;
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Throws StructuralError naming `what` when shapes differ.
void require_same_shape(const ViewStack& a, const ViewStack& b, std::string_view what);
void require_same_shape(const Image& a, const Image& b, std::string_view what);

// a*x + b*y elementwise.
ViewStack axpby(double a, const ViewStack& x, double b, const ViewStack& y);

double max_abs_diff(const ViewStack& a, const ViewStack& b);
double mean_abs_diff(const ViewStack& a, const ViewStack& b);
double squared_norm(const ViewStack& a);

// 2x2 box downsampling; odd trailing rows/cols are dropped.
Image downsample2(const Image& img);
Image resize_bilinear(const Image& img, int height, int width);
Image box_resize(const Image& img, int height, int width);

}  // namespace mvlab
