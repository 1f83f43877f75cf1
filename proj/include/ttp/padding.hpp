#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttp/errors.hpp"
#include "ttp/image.hpp"
#include "ttp/random.hpp"

namespace ttp {

enum class PaddingKind { zero, white, random };

inline std::string_view to_string(PaddingKind kind) {
  switch (kind) {
    case PaddingKind::zero: return "zero";
    case PaddingKind::white: return "white";
    case PaddingKind::random: return "random";
  }
  return "zero";
}

inline PaddingKind parse_padding_kind(std::string_view text) {
  if (text == "zero" || text == "0") return PaddingKind::zero;
  if (text == "white" || text == "255") return PaddingKind::white;
  if (text == "random") return PaddingKind::random;
  throw InvalidArgument("unknown padding pattern '" + std::string(text) + "' (expected zero|white|random)");
}

struct PaddingPattern {
  PaddingKind kind = PaddingKind::zero;
  std::uint64_t seed = 0;  // random only
};

/// Number of pixels in the frame of width `pad` around an H x W image.
constexpr std::size_t border_pixel_count(int height, int width, int pad) noexcept {
  const auto h = static_cast<std::size_t>(height);
  const auto w = static_cast<std::size_t>(width);
  const auto p = static_cast<std::size_t>(pad);
  return (h + 2 * p) * (w + 2 * p) - h * w;
}

/// Visits the frame pixels of the padded canvas in row-major order as
/// f(y, x, k), with k the running border-pixel index.
template <class F>
void for_each_border_pixel(int height, int width, int pad, F&& f) {
  const int ph = height + 2 * pad;
  const int pw = width + 2 * pad;
  std::size_t k = 0;
  for (int y = 0; y < ph; ++y) {
    const bool interior_row = y >= pad && y < pad + height;
    for (int x = 0; x < pw; ++x) {
      if (interior_row && x >= pad && x < pad + width) {
        x = pad + width - 1;
        continue;
      }
      f(y, x, k++);
    }
  }
}

namespace detail {

inline Image place_center(const Image& image, int pad) {
  Image out(image.height() + 2 * pad, image.width() + 2 * pad);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < Image::kChannels; ++c) out.at(y + pad, x + pad, c) = image.at(y, x, c);
  return out;
}

}  // namespace detail

/// P_fix: surrounds the image with a constant or seeded-noise frame.
inline Image apply_fixed_padding(const Image& image, const PaddingPattern& pattern, int pad_width) {
  detail::require(!image.empty(), "cannot pad an empty image");
  detail::require(pad_width >= 0, "pad_width must be >= 0");
  if (pad_width == 0) return image;
  Image out = detail::place_center(image, pad_width);
  switch (pattern.kind) {
    case PaddingKind::zero:
      break;
    case PaddingKind::white:
      for_each_border_pixel(image.height(), image.width(), pad_width, [&](int y, int x, std::size_t) {
        for (int c = 0; c < Image::kChannels; ++c) out.at(y, x, c) = kPixelMax;
      });
      break;
    case PaddingKind::random: {
      Rng rng(derive_seed(pattern.seed, 0xbd));
      std::uniform_int_distribution<int> level(0, 255);
      for_each_border_pixel(image.height(), image.width(), pad_width, [&](int y, int x, std::size_t) {
        for (int c = 0; c < Image::kChannels; ++c) out.at(y, x, c) = level(rng);
      });
      break;
    }
  }
  return out;
}

/// Instance-specific trainable frame P_theta.
///
/// One parameter per border pixel per channel, laid out in border row-major
/// order with channels interleaved. Pixel value = clamp(theta * scale, 0, 255).
/// Values are immutable snapshots; `sgd_step` returns a new instance.
class TrainablePadding {
 public:
  static constexpr double kDefaultScale = kPixelMax / 10.0;

  TrainablePadding(int height, int width, int pad_width, std::vector<double> theta, double scale = kDefaultScale)
      : height_(height), width_(width), pad_(pad_width), scale_(scale), theta_(std::move(theta)) {
    detail::require(height > 0 && width > 0, "trainable padding: target size must be positive");
    detail::require(pad_width >= 1, "trainable padding: pad_width must be >= 1");
    detail::require(scale > 0.0 && std::isfinite(scale), "trainable padding: scale must be positive");
    detail::require(theta_.size() == parameter_count(height, width, pad_width),
                    "trainable padding: expected " + std::to_string(parameter_count(height, width, pad_width)) +
                        " parameters, got " + std::to_string(theta_.size()));
    for (double v : theta_) detail::require(std::isfinite(v), "trainable padding: non-finite parameter");
  }

  static std::size_t parameter_count(int height, int width, int pad_width) noexcept {
    return border_pixel_count(height, width, pad_width) * Image::kChannels;
  }

  int target_height() const noexcept { return height_; }
  int target_width() const noexcept { return width_; }
  int pad_width() const noexcept { return pad_; }
  double scale() const noexcept { return scale_; }
  std::span<const double> theta() const noexcept { return theta_; }

  Image apply(const Image& image) const {
    detail::require(image.height() == height_ && image.width() == width_,
                    "trainable padding built for " + std::to_string(height_) + "x" + std::to_string(width_) +
                        ", got " + std::to_string(image.height()) + "x" + std::to_string(image.width()));
    Image out = detail::place_center(image, pad_);
    for_each_border_pixel(height_, width_, pad_, [&](int y, int x, std::size_t k) {
      for (int c = 0; c < Image::kChannels; ++c)
        out.at(y, x, c) = std::clamp(theta_[k * Image::kChannels + c] * scale_, 0.0, kPixelMax);
    });
    return out;
  }

  /// Pulls a gradient on the padded canvas back to theta. The clamp passes
  /// gradient only where it is inactive (0 < theta * scale < 255).
  std::vector<double> theta_gradient(const Image& grad_padded) const {
    detail::require(grad_padded.height() == height_ + 2 * pad_ && grad_padded.width() == width_ + 2 * pad_,
                    "theta_gradient: gradient does not match padded canvas");
    std::vector<double> grad(theta_.size(), 0.0);
    for_each_border_pixel(height_, width_, pad_, [&](int y, int x, std::size_t k) {
      for (int c = 0; c < Image::kChannels; ++c) {
        const std::size_t i = k * Image::kChannels + c;
        const double pixel = theta_[i] * scale_;
        if (pixel > 0.0 && pixel < kPixelMax) grad[i] = grad_padded.at(y, x, c) * scale_;
      }
    });
    return grad;
  }

  /// theta' = theta - lr * grad.
  TrainablePadding sgd_step(std::span<const double> grad, double lr) const {
    detail::require(grad.size() == theta_.size(), "sgd_step: gradient shape does not match theta");
    detail::require(lr > 0.0 && std::isfinite(lr), "sgd_step: learning rate must be positive");
    std::vector<double> next(theta_);
    for (std::size_t i = 0; i < next.size(); ++i) {
      detail::require(std::isfinite(grad[i]), "sgd_step: non-finite gradient");
      next[i] -= lr * grad[i];
    }
    return {height_, width_, pad_, std::move(next), scale_};
  }

  friend bool operator==(const TrainablePadding&, const TrainablePadding&) = default;

 private:
  int height_;
  int width_;
  int pad_;
  double scale_;
  std::vector<double> theta_;
};

/// theta ~ U[0, 10] i.i.d., i.e. the full [0,255] pixel range under the default scale.
inline TrainablePadding init_trainable_padding(int pad_width, int height, int width, std::uint64_t seed,
                                               double scale = TrainablePadding::kDefaultScale) {
  detail::require(pad_width >= 1, "init_trainable_padding: pad_width must be >= 1");
  detail::require(height > 0 && width > 0, "init_trainable_padding: target size must be positive");
  Rng rng(derive_seed(seed, 0x9ad));
  std::uniform_real_distribution<double> unit(0.0, 10.0);
  std::vector<double> theta(TrainablePadding::parameter_count(height, width, pad_width));
  for (double& v : theta) v = unit(rng);
  return {height, width, pad_width, std::move(theta), scale};
}

inline Image apply_trainable_padding(const Image& image, const TrainablePadding& pad) { return pad.apply(image); }

inline TrainablePadding sgd_step(const TrainablePadding& pad, std::span<const double> grad, double lr = 5.0) {
  return pad.sgd_step(grad, lr);
}

}  // namespace ttp
