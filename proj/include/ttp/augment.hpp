#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "ttp/errors.hpp"
#include "ttp/image.hpp"
#include "ttp/random.hpp"

namespace ttp {

/// Stochastic view family: random resized crop, horizontal flip, brightness /
/// contrast jitter, then an optional AugMix-style blend of short op chains.
struct AugmentationConfig {
  double min_crop_scale = 0.5;
  double max_crop_scale = 1.0;
  double flip_probability = 0.5;
  double jitter = 0.2;
  bool mix_chains = true;
  int mix_width = 3;
  int mix_max_depth = 3;
  int severity = 3;  // 1..10

  void validate() const {
    detail::require(min_crop_scale > 0.0 && min_crop_scale <= max_crop_scale && max_crop_scale <= 1.0,
                    "crop scale range must satisfy 0 < min <= max <= 1");
    detail::require(flip_probability >= 0.0 && flip_probability <= 1.0, "flip probability must be in [0,1]");
    detail::require(jitter >= 0.0 && jitter < 1.0, "jitter must be in [0,1)");
    detail::require(mix_width >= 1 && mix_max_depth >= 1, "mix width and depth must be >= 1");
    detail::require(severity >= 1 && severity <= 10, "severity must be in [1,10]");
  }
};

/// A view transform: given the source image and a private RNG, produce a new image.
using ViewTransform = std::function<Image(const Image&, Rng&)>;

namespace augment {

inline Image crop_resize(const Image& src, int top, int left, int h, int w, int out_h, int out_w) {
  Image crop(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < Image::kChannels; ++c) crop.at(y, x, c) = src.at(top + y, left + x, c);
  return resize(crop, out_h, out_w, ResizeFilter::bilinear);
}

/// Area fraction drawn from [min_scale, max_scale], log-uniform aspect ratio
/// in [3/4, 4/3]; falls back to a centre crop after ten rejected draws.
inline Image random_resized_crop(const Image& src, double min_scale, double max_scale, Rng& rng) {
  const int H = src.height();
  const int W = src.width();
  std::uniform_real_distribution<double> scale_dist(min_scale, max_scale);
  std::uniform_real_distribution<double> log_ratio(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double area = scale_dist(rng) * H * W;
    const double ratio = std::exp(log_ratio(rng));
    const int w = static_cast<int>(std::lround(std::sqrt(area * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(area / ratio)));
    if (w >= 1 && h >= 1 && w <= W && h <= H) {
      const int top = std::uniform_int_distribution<int>(0, H - h)(rng);
      const int left = std::uniform_int_distribution<int>(0, W - w)(rng);
      return crop_resize(src, top, left, h, w, H, W);
    }
  }
  const int side = std::max(1, static_cast<int>(std::lround(std::sqrt(min_scale) * std::min(H, W))));
  return crop_resize(src, (H - side) / 2, (W - side) / 2, side, side, H, W);
}

inline Image flip_horizontal(const Image& src) {
  Image out(src.height(), src.width());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < Image::kChannels; ++c) out.at(y, x, c) = src.at(y, src.width() - 1 - x, c);
  return out;
}

inline double mean_intensity(const Image& img) {
  double acc = 0.0;
  for (double v : img.values()) acc += v;
  return acc / static_cast<double>(img.size());
}

inline Image brightness(const Image& src, double factor) {
  Image out = src;
  for (double& v : out.values()) v *= factor;
  clamp_pixels(out);
  return out;
}

inline Image contrast(const Image& src, double factor) {
  const double mean = mean_intensity(src);
  Image out = src;
  for (double& v : out.values()) v = mean + factor * (v - mean);
  clamp_pixels(out);
  return out;
}

inline Image autocontrast(const Image& src) {
  Image out = src;
  for (int c = 0; c < Image::kChannels; ++c) {
    double lo = kPixelMax;
    double hi = 0.0;
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x) {
        lo = std::min(lo, src.at(y, x, c));
        hi = std::max(hi, src.at(y, x, c));
      }
    if (hi <= lo) continue;
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x) out.at(y, x, c) = (src.at(y, x, c) - lo) * kPixelMax / (hi - lo);
  }
  return out;
}

inline Image posterize(const Image& src, int bits) {
  const double levels = std::exp2(8 - bits);
  Image out = src;
  for (double& v : out.values()) v = std::floor(v / levels) * levels;
  return out;
}

inline Image solarize(const Image& src, double threshold) {
  Image out = src;
  for (double& v : out.values())
    if (v >= threshold) v = kPixelMax - v;
  return out;
}

/// Integer shift with mid-grey fill.
inline Image translate(const Image& src, int dy, int dx) {
  Image out(src.height(), src.width(), 128.0);
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) {
      const int sy = y - dy;
      const int sx = x - dx;
      if (sy < 0 || sx < 0 || sy >= src.height() || sx >= src.width()) continue;
      for (int c = 0; c < Image::kChannels; ++c) out.at(y, x, c) = src.at(sy, sx, c);
    }
  return out;
}

inline Image random_op(const Image& src, int severity, Rng& rng) {
  const double level = severity / 10.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (std::uniform_int_distribution<int>(0, 6)(rng)) {
    case 0: return autocontrast(src);
    case 1: return posterize(src, 8 - static_cast<int>(std::lround(u(rng) * 4.0 * level)));
    case 2: return solarize(src, kPixelMax - u(rng) * kPixelMax * level);
    case 3: return brightness(src, 1.0 + (u(rng) * 2.0 - 1.0) * 0.9 * level);
    case 4: return contrast(src, 1.0 + (u(rng) * 2.0 - 1.0) * 0.9 * level);
    case 5: {
      const int max_shift = static_cast<int>(src.width() * level / 3.0);
      return translate(src, 0, std::uniform_int_distribution<int>(-max_shift, max_shift)(rng));
    }
    default: {
      const int max_shift = static_cast<int>(src.height() * level / 3.0);
      return translate(src, std::uniform_int_distribution<int>(-max_shift, max_shift)(rng), 0);
    }
  }
}

inline double sample_gamma1(Rng& rng) { return std::gamma_distribution<double>(1.0, 1.0)(rng); }

/// Convex mix of `width` random op chains, blended back with the source
/// using Dirichlet(1) chain weights and a Beta(1,1) skip weight.
inline Image mix_chains(const Image& src, const AugmentationConfig& cfg, Rng& rng) {
  std::vector<double> weights(cfg.mix_width);
  double total = 0.0;
  for (double& w : weights) total += (w = sample_gamma1(rng));
  for (double& w : weights) w /= total;
  const double a = sample_gamma1(rng);
  const double b = sample_gamma1(rng);
  const double m = a / (a + b);

  Image mix(src.height(), src.width());
  for (int i = 0; i < cfg.mix_width; ++i) {
    Image chain = src;
    const int depth = std::uniform_int_distribution<int>(1, cfg.mix_max_depth)(rng);
    for (int d = 0; d < depth; ++d) chain = random_op(chain, cfg.severity, rng);
    auto mv = mix.values();
    auto cv = chain.values();
    for (std::size_t k = 0; k < mv.size(); ++k) mv[k] += weights[i] * cv[k];
  }
  Image out = src;
  auto ov = out.values();
  auto mv = mix.values();
  for (std::size_t k = 0; k < ov.size(); ++k) ov[k] = (1.0 - m) * ov[k] + m * mv[k];
  clamp_pixels(out);
  return out;
}

}  // namespace augment

/// The default stochastic transform built from `cfg`.
inline ViewTransform make_view_transform(const AugmentationConfig& cfg) {
  cfg.validate();
  return [cfg](const Image& src, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image view = augment::random_resized_crop(src, cfg.min_crop_scale, cfg.max_crop_scale, rng);
    if (u(rng) < cfg.flip_probability) view = augment::flip_horizontal(view);
    if (cfg.jitter > 0.0) {
      view = augment::brightness(view, 1.0 + (u(rng) * 2.0 - 1.0) * cfg.jitter);
      view = augment::contrast(view, 1.0 + (u(rng) * 2.0 - 1.0) * cfg.jitter);
    }
    if (cfg.mix_chains) view = augment::mix_chains(view, cfg, rng);
    return view;
  };
}

/// View 0 is the untouched input; view k >= 1 uses its own derived RNG stream,
/// so the batch depends only on (image, seed, count).
inline std::vector<Image> generate_views(const Image& image, int count, std::uint64_t seed,
                                         const ViewTransform& transform) {
  detail::require(count >= 1, "generate_views: need at least one view");
  detail::require(!image.empty(), "generate_views: empty image");
  std::vector<Image> views;
  views.reserve(count);
  views.push_back(image);
  for (int k = 1; k < count; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    Image v = transform(image, rng);
    detail::require(v.same_shape(image), "view transform must preserve the image size");
    views.push_back(std::move(v));
  }
  return views;
}

}  // namespace ttp
