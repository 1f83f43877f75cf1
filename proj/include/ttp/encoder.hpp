#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttp/errors.hpp"
#include "ttp/image.hpp"
#include "ttp/random.hpp"

namespace ttp {

/// Fixed-dimension feature vector produced by an image or text encoder.
struct Embedding {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Frozen vision-language encoder pair.
///
/// Implementations own their preprocessing (resize to `input_resolution()`,
/// intensity normalization), so callers always pass raw [0,255] pixels of any
/// size. `embedding_vjp` returns the gradient of <cotangent, F(x)> with respect
/// to the raw input pixels, which is all the attacks and the padding update
/// need. Instances must be immutable after construction; every method may be
/// called concurrently.
class ImageEncoder {
 public:
  virtual ~ImageEncoder() = default;

  Embedding encode_image(const Image& image) const {
    check_finite(image);
    return do_encode_image(image);
  }

  Image embedding_vjp(const Image& image, std::span<const double> cotangent) const {
    check_finite(image);
    detail::require(cotangent.size() == static_cast<std::size_t>(embed_dim()),
                    "embedding_vjp: cotangent has dimension " + std::to_string(cotangent.size()) +
                        ", encoder produces " + std::to_string(embed_dim()));
    return do_embedding_vjp(image, cotangent);
  }

  Embedding encode_text(std::string_view text) const { return do_encode_text(text); }

  virtual int input_resolution() const = 0;
  virtual int embed_dim() const = 0;
  virtual std::string name() const = 0;

 protected:
  virtual Embedding do_encode_image(const Image& image) const = 0;
  virtual Image do_embedding_vjp(const Image& image, std::span<const double> cotangent) const = 0;
  virtual Embedding do_encode_text(std::string_view text) const = 0;

 private:
  static void check_finite(const Image& image) {
    detail::require(!image.empty(), "cannot encode an empty image");
    for (double v : image.values()) detail::require(std::isfinite(v), "image contains non-finite pixel values");
  }
};

using EncoderHandle = std::shared_ptr<const ImageEncoder>;

/// Per-channel affine normalization applied after scaling pixels to [0,1].
struct Normalization {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

/// Deterministic, smooth encoder for desk-scale work.
///
/// Image path: bilinear resize to the input resolution, scale to [0,1] and
/// normalize, area-average down to a 16x16x3 grid, apply a seeded Gaussian
/// linear map to `embed_dim`, then tanh. Text path: a seeded hash of the
/// string selects a fixed random unit vector.
class ToyEncoder final : public ImageEncoder {
 public:
  static constexpr int kGrid = 16;
  static constexpr int kFeatures = kGrid * kGrid * Image::kChannels;

  ToyEncoder(std::uint64_t seed, int embed_dim, int input_resolution, Normalization norm = {})
      : seed_(seed), dim_(embed_dim), resolution_(input_resolution), norm_(norm) {
    detail::require(embed_dim >= 2, "toy encoder: embed_dim must be >= 2");
    detail::require(input_resolution >= 8, "toy encoder: input_resolution must be >= 8");
    Rng rng(derive_seed(seed, 0x1a2b));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(kFeatures)));
    weights_.resize(static_cast<std::size_t>(dim_) * kFeatures);
    for (double& w : weights_) w = normal(rng);
  }

  int input_resolution() const override { return resolution_; }
  int embed_dim() const override { return dim_; }
  std::string name() const override {
    return "toy:seed=" + std::to_string(seed_) + ",dim=" + std::to_string(dim_) +
           ",res=" + std::to_string(resolution_);
  }

 protected:
  Embedding do_encode_image(const Image& image) const override {
    const auto pre = preactivation(features(image));
    Embedding out;
    out.values.resize(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) out.values[i] = std::tanh(pre[i]);
    return out;
  }

  Image do_embedding_vjp(const Image& image, std::span<const double> cotangent) const override {
    const auto pre = preactivation(features(image));
    std::vector<double> grad_pre(dim_);
    for (int i = 0; i < dim_; ++i) {
      const double t = std::tanh(pre[i]);
      grad_pre[i] = cotangent[i] * (1.0 - t * t);
    }
    Image grad_grid(kGrid, kGrid);
    auto g = grad_grid.values();
    for (int i = 0; i < dim_; ++i) {
      const double* row = &weights_[static_cast<std::size_t>(i) * kFeatures];
      for (int k = 0; k < kFeatures; ++k) g[k] += grad_pre[i] * row[k];
    }
    for (int y = 0; y < kGrid; ++y)
      for (int x = 0; x < kGrid; ++x)
        for (int c = 0; c < Image::kChannels; ++c) grad_grid.at(y, x, c) /= kPixelMax * norm_.stddev[c];

    const auto area = make_area_resampler(resolution_, kGrid);
    Image grad_resized = resample_adjoint(grad_grid, area, area);
    if (image.height() == resolution_ && image.width() == resolution_) return grad_resized;
    return resample_adjoint(grad_resized, make_bilinear_resampler(image.height(), resolution_),
                            make_bilinear_resampler(image.width(), resolution_));
  }

  Embedding do_encode_text(std::string_view text) const override {
    Rng rng(derive_seed(seed_ ^ fnv1a(text), 0x7e47));
    std::normal_distribution<double> normal(0.0, 1.0);
    Embedding out;
    out.values.resize(dim_);
    double norm2 = 0.0;
    for (double& v : out.values) {
      v = normal(rng);
      norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : out.values) v *= inv;
    return out;
  }

 private:
  std::vector<double> features(const Image& image) const {
    const Image resized = resize(image, resolution_, resolution_, ResizeFilter::bilinear);
    const auto area = make_area_resampler(resolution_, kGrid);
    Image grid = resample(resized, area, area);
    for (int y = 0; y < kGrid; ++y)
      for (int x = 0; x < kGrid; ++x)
        for (int c = 0; c < Image::kChannels; ++c) {
          double& v = grid.at(y, x, c);
          v = (v / kPixelMax - norm_.mean[c]) / norm_.stddev[c];
        }
    return {grid.values().begin(), grid.values().end()};
  }

  std::vector<double> preactivation(const std::vector<double>& feat) const {
    std::vector<double> out(dim_, 0.0);
    for (int i = 0; i < dim_; ++i) {
      const double* row = &weights_[static_cast<std::size_t>(i) * kFeatures];
      double acc = 0.0;
      for (int k = 0; k < kFeatures; ++k) acc += row[k] * feat[k];
      out[i] = acc;
    }
    return out;
  }

  std::uint64_t seed_;
  int dim_;
  int resolution_;
  Normalization norm_;
  std::vector<double> weights_;  // dim_ x kFeatures, row-major
};

inline EncoderHandle make_toy_encoder(std::uint64_t seed, int embed_dim = 32, int input_resolution = 224) {
  return std::make_shared<const ToyEncoder>(seed, embed_dim, input_resolution);
}

/// Counts calls into a wrapped encoder. Used to assert routing and
/// single-step contracts without touching the algorithms themselves.
class InstrumentedEncoder final : public ImageEncoder {
 public:
  enum class CallKind { forward, gradient };
  struct Call {
    CallKind kind;
    int height;
    int width;
  };

  explicit InstrumentedEncoder(EncoderHandle inner) : inner_(std::move(inner)) {
    detail::require(inner_ != nullptr, "InstrumentedEncoder needs an encoder");
  }

  int input_resolution() const override { return inner_->input_resolution(); }
  int embed_dim() const override { return inner_->embed_dim(); }
  std::string name() const override { return inner_->name(); }

  std::size_t forward_calls() const noexcept { return forward_.load(); }
  std::size_t gradient_calls() const noexcept { return gradient_.load(); }
  std::size_t text_calls() const noexcept { return text_.load(); }

  std::vector<Call> calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }

  void reset() const {
    std::lock_guard lock(mutex_);
    calls_.clear();
    forward_ = 0;
    gradient_ = 0;
    text_ = 0;
  }

 protected:
  Embedding do_encode_image(const Image& image) const override {
    ++forward_;
    record({CallKind::forward, image.height(), image.width()});
    return inner_->encode_image(image);
  }
  Image do_embedding_vjp(const Image& image, std::span<const double> cotangent) const override {
    ++gradient_;
    record({CallKind::gradient, image.height(), image.width()});
    return inner_->embedding_vjp(image, cotangent);
  }
  Embedding do_encode_text(std::string_view text) const override {
    ++text_;
    return inner_->encode_text(text);
  }

 private:
  void record(Call call) const {
    std::lock_guard lock(mutex_);
    calls_.push_back(call);
  }

  EncoderHandle inner_;
  mutable std::atomic<std::size_t> forward_{0};
  mutable std::atomic<std::size_t> gradient_{0};
  mutable std::atomic<std::size_t> text_{0};
  mutable std::mutex mutex_;
  mutable std::vector<Call> calls_;
};

/// Resolves a backend identifier to an encoder.
///
/// Accepted forms: `toy` and `toy:seed=S,dim=D,res=R` (any subset of keys).
/// Pretrained backbones need an adapter that implements ImageEncoder; none is
/// linked into this build, so other identifiers are rejected.
inline EncoderHandle make_encoder(std::string_view backend_id) {
  std::string_view kind = backend_id.substr(0, backend_id.find(':'));
  if (kind != "toy") {
    throw ConfigError("backend '" + std::string(backend_id) +
                      "' is not available in this build (supported: toy[:seed=S,dim=D,res=R])");
  }
  std::uint64_t seed = 0;
  int dim = 32;
  int res = 224;
  if (auto colon = backend_id.find(':'); colon != std::string_view::npos) {
    std::string_view rest = backend_id.substr(colon + 1);
    while (!rest.empty()) {
      auto comma = rest.find(',');
      std::string_view item = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      auto eq = item.find('=');
      if (eq == std::string_view::npos) throw ConfigError("malformed backend option '" + std::string(item) + "'");
      std::string key(item.substr(0, eq));
      std::string value(item.substr(eq + 1));
      try {
        if (key == "seed") {
          seed = std::stoull(value);
        } else if (key == "dim") {
          dim = std::stoi(value);
        } else if (key == "res") {
          res = std::stoi(value);
        } else {
          throw ConfigError("unknown toy backend option '" + key + "'");
        }
      } catch (const std::logic_error&) {
        throw ConfigError("bad value for backend option '" + key + "': " + value);
      }
    }
  }
  try {
    return make_toy_encoder(seed, dim, res);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace ttp
