#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ttp/errors.hpp"

namespace ttp {

inline constexpr double kPixelMax = 255.0;

/// H x W x 3 buffer of doubles stored row-major, channels interleaved.
///
/// Pixel images live in [0, 255]. The same type also carries gradients with
/// respect to pixels, which are unbounded; range checks are therefore explicit
/// (see `validate_pixels`) rather than enforced on every write.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int height, int width, double fill = 0.0)
      : height_(height), width_(width) {
    detail::require(height > 0 && width > 0,
                    "image dimensions must be positive, got " + std::to_string(height) + "x" +
                        std::to_string(width));
    data_.assign(static_cast<std::size_t>(height) * width * kChannels, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }
  double& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Throws InvalidArgument unless every value is finite and within [0, 255].
inline void validate_pixels(const Image& image) {
  detail::require(!image.empty(), "image is empty");
  for (double v : image.values()) {
    detail::require(std::isfinite(v), "image contains non-finite pixel values");
    detail::require(v >= 0.0 && v <= kPixelMax, "image pixel outside [0,255]");
  }
}

inline void clamp_pixels(Image& image) {
  for (double& v : image.values()) v = std::clamp(v, 0.0, kPixelMax);
}

/// Sparse 1-D linear resampling operator, out[i] = sum_k weight[k] * in[index[k]].
///
/// Separable resizes (bilinear, nearest, area) are products of a row operator
/// and a column operator, so the adjoint needed for backpropagation is the
/// same pair applied transposed.
class Resampler1D {
 public:
  Resampler1D() = default;
  Resampler1D(int in_size, int out_size) : in_(in_size), out_(out_size), offsets_{0} {}

  int in_size() const noexcept { return in_; }
  int out_size() const noexcept { return out_; }

  void push(int source, double weight) {
    index_.push_back(source);
    weight_.push_back(weight);
  }
  void finish_row() { offsets_.push_back(index_.size()); }

  template <class F>
  void for_each_tap(int out_index, F&& f) const {
    for (std::size_t k = offsets_[out_index]; k < offsets_[out_index + 1]; ++k) f(index_[k], weight_[k]);
  }

 private:
  int in_ = 0;
  int out_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<int> index_;
  std::vector<double> weight_;
};

enum class ResizeFilter { bilinear, nearest, area };

/// Half-pixel-centre bilinear weights without antialiasing (the common
/// deep-learning convention, align_corners = false).
inline Resampler1D make_bilinear_resampler(int in_size, int out_size) {
  Resampler1D r(in_size, out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int i = 0; i < out_size; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = std::min(static_cast<int>(std::floor(src)), in_size - 1);
    int i1 = std::min(i0 + 1, in_size - 1);
    double frac = src - i0;
    if (i1 == i0 || frac == 0.0) {
      r.push(i0, 1.0);
    } else {
      r.push(i0, 1.0 - frac);
      r.push(i1, frac);
    }
    r.finish_row();
  }
  return r;
}

inline Resampler1D make_nearest_resampler(int in_size, int out_size) {
  Resampler1D r(in_size, out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int i = 0; i < out_size; ++i) {
    r.push(std::min(static_cast<int>(std::floor(i * scale)), in_size - 1), 1.0);
    r.finish_row();
  }
  return r;
}

/// Exact area averaging: each output cell averages the input interval it
/// covers, with fractional overlap weights.
inline Resampler1D make_area_resampler(int in_size, int out_size) {
  Resampler1D r(in_size, out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int i = 0; i < out_size; ++i) {
    const double lo = i * scale;
    const double hi = (i + 1) * scale;
    for (int s = static_cast<int>(std::floor(lo)); s < in_size && s < hi; ++s) {
      const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
      if (overlap > 0.0) r.push(s, overlap / scale);
    }
    r.finish_row();
  }
  return r;
}

inline Resampler1D make_resampler(ResizeFilter filter, int in_size, int out_size) {
  detail::require(in_size > 0 && out_size > 0, "resample sizes must be positive");
  switch (filter) {
    case ResizeFilter::bilinear: return make_bilinear_resampler(in_size, out_size);
    case ResizeFilter::nearest: return make_nearest_resampler(in_size, out_size);
    case ResizeFilter::area: return make_area_resampler(in_size, out_size);
  }
  return make_bilinear_resampler(in_size, out_size);
}

/// Applies `rows` along the height axis and `cols` along the width axis.
inline Image resample(const Image& src, const Resampler1D& rows, const Resampler1D& cols) {
  detail::require(src.height() == rows.in_size() && src.width() == cols.in_size(),
                  "resample: operator does not match image shape");
  Image tmp(src.height(), cols.out_size());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < cols.out_size(); ++x)
      cols.for_each_tap(x, [&](int sx, double w) {
        for (int c = 0; c < Image::kChannels; ++c) tmp.at(y, x, c) += w * src.at(y, sx, c);
      });
  Image out(rows.out_size(), cols.out_size());
  for (int y = 0; y < rows.out_size(); ++y)
    rows.for_each_tap(y, [&](int sy, double w) {
      for (int x = 0; x < cols.out_size(); ++x)
        for (int c = 0; c < Image::kChannels; ++c) out.at(y, x, c) += w * tmp.at(sy, x, c);
    });
  return out;
}

/// Transpose of `resample`: maps a gradient on the output grid back onto the input grid.
inline Image resample_adjoint(const Image& grad_out, const Resampler1D& rows, const Resampler1D& cols) {
  detail::require(grad_out.height() == rows.out_size() && grad_out.width() == cols.out_size(),
                  "resample_adjoint: operator does not match gradient shape");
  Image tmp(rows.in_size(), cols.out_size());
  for (int y = 0; y < rows.out_size(); ++y)
    rows.for_each_tap(y, [&](int sy, double w) {
      for (int x = 0; x < cols.out_size(); ++x)
        for (int c = 0; c < Image::kChannels; ++c) tmp.at(sy, x, c) += w * grad_out.at(y, x, c);
    });
  Image out(rows.in_size(), cols.in_size());
  for (int y = 0; y < rows.in_size(); ++y)
    for (int x = 0; x < cols.out_size(); ++x)
      cols.for_each_tap(x, [&](int sx, double w) {
        for (int c = 0; c < Image::kChannels; ++c) out.at(y, sx, c) += w * tmp.at(y, x, c);
      });
  return out;
}

inline Image resize(const Image& src, int height, int width, ResizeFilter filter = ResizeFilter::bilinear) {
  if (src.height() == height && src.width() == width && filter != ResizeFilter::area) return src;
  return resample(src, make_resampler(filter, src.height(), height), make_resampler(filter, src.width(), width));
}

}  // namespace ttp
