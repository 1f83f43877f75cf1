#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "ttp/augment.hpp"
#include "ttp/encoder.hpp"
#include "ttp/errors.hpp"
#include "ttp/padding.hpp"
#include "ttp/zero_shot.hpp"

namespace ttp {

struct AdaptationConfig {
  int num_views = 64;
  double select_fraction = 0.1;
  double lr = 5.0;
  std::uint64_t seed = 0;
  AugmentationConfig augmentation{};
  ViewTransform transform{};  // empty: built from `augmentation`

  std::size_t selected_count() const {
    return static_cast<std::size_t>(std::ceil(select_fraction * num_views - 1e-12));
  }

  void validate() const {
    detail::require(num_views >= 1, "num_views must be >= 1");
    detail::require(select_fraction > 0.0 && select_fraction <= 1.0, "select_fraction must be in (0,1]");
    detail::require(lr > 0.0 && std::isfinite(lr), "padding learning rate must be > 0");
    detail::require(selected_count() >= 1, "selection would be empty");
    augmentation.validate();
  }
};

inline std::vector<Image> generate_views(const Image& image, const AdaptationConfig& cfg) {
  cfg.validate();
  return generate_views(image, cfg.num_views, cfg.seed,
                        cfg.transform ? cfg.transform : make_view_transform(cfg.augmentation));
}

/// Shannon entropy in nats, with 0 log 0 = 0.
inline double entropy(const ProbabilityVector& p) {
  double h = 0.0;
  for (double v : p.probs)
    if (v > 0.0) h -= v * std::log(v);
  return std::max(h, 0.0);
}

/// d H(softmax(z)) / dz_k = -p_k (log p_k + H).
inline std::vector<double> entropy_logit_gradient(const ProbabilityVector& p) {
  const double h = entropy(p);
  std::vector<double> g(p.size(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0.0) g[k] = -p[k] * (std::log(p[k]) + h);
  return g;
}

/// Indices of the ceil(fraction * N) lowest entropies, ascending by entropy,
/// ties to the lower index.
inline std::vector<std::size_t> select_confident(std::span<const double> entropies, double fraction) {
  detail::require(!entropies.empty(), "select_confident: empty entropy list");
  detail::require(fraction > 0.0 && fraction <= 1.0, "select_confident: fraction must be in (0,1]");
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(entropies.size()) - 1e-12)));
  std::vector<std::size_t> order(entropies.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return entropies[a] < entropies[b]; });
  order.resize(std::min(k, order.size()));
  return order;
}

struct ViewBatch {
  std::vector<Image> views;
  std::vector<double> entropies;  // unpadded views
  std::vector<std::size_t> selected;
};

/// Mean padded-view entropy over `selected`, optionally with its theta gradient.
struct EntropyLoss {
  double value = 0.0;
  std::vector<double> theta_grad;  // empty unless requested
  std::size_t padded_encodings = 0;
  std::size_t gradient_evaluations = 0;
};

inline EntropyLoss padded_entropy_loss(const ImageEncoder& encoder, const ClassPrototypeSet& protos,
                                       const ClassifierConfig& cls, std::span<const Image> views,
                                       std::span<const std::size_t> selected, const TrainablePadding& pad,
                                       bool with_gradient) {
  detail::require(!selected.empty(), "padded_entropy_loss: empty selection");
  EntropyLoss loss;
  if (with_gradient) loss.theta_grad.assign(pad.theta().size(), 0.0);
  const double inv = 1.0 / static_cast<double>(selected.size());
  for (std::size_t idx : selected) {
    detail::require(idx < views.size(), "padded_entropy_loss: selected index out of range");
    const Image padded = pad.apply(views[idx]);
    const Embedding f = encoder.encode_image(padded);
    ++loss.padded_encodings;
    const ProbabilityVector p = classify(f, protos, cls);
    loss.value += inv * entropy(p);
    if (!with_gradient) continue;
    const auto grad_f = logits_embedding_vjp(f, protos, cls, entropy_logit_gradient(p));
    const Image grad_img = encoder.embedding_vjp(padded, grad_f);
    ++loss.gradient_evaluations;
    const auto g = pad.theta_gradient(grad_img);
    for (std::size_t i = 0; i < g.size(); ++i) loss.theta_grad[i] += inv * g[i];
  }
  return loss;
}

struct AdaptationResult {
  TrainablePadding padding;
  ViewBatch batch;
  double loss_before = 0.0;
  int updates = 0;
  std::size_t padded_encodings = 0;
  std::size_t gradient_evaluations = 0;
};

/// One entropy-minimization step on the trainable frame:
///   1. generate N views (view 0 = input),
///   2. rank them by unpadded entropy and keep the confident subset B,
///   3. L = mean_{i in B} H(classify(F(P_theta(x_i)))),
///   4. theta <- theta - lr * grad L, exactly once.
inline AdaptationResult adapt_padding(const ImageEncoder& encoder, const ClassPrototypeSet& protos,
                                      const ClassifierConfig& cls, const Image& adv_image, const AdaptationConfig& cfg,
                                      const TrainablePadding& pad) {
  cfg.validate();
  detail::require(adv_image.height() == pad.target_height() && adv_image.width() == pad.target_width(),
                  "adapt_padding: padding was initialized for a different image size");
  ViewBatch batch;
  batch.views = generate_views(adv_image, cfg);
  batch.entropies.reserve(batch.views.size());
  for (const Image& v : batch.views) batch.entropies.push_back(entropy(classify(encoder.encode_image(v), protos, cls)));
  batch.selected = select_confident(batch.entropies, cfg.select_fraction);

  EntropyLoss loss = padded_entropy_loss(encoder, protos, cls, batch.views, batch.selected, pad, true);
  AdaptationResult result{pad.sgd_step(loss.theta_grad, cfg.lr), std::move(batch), loss.value, 1,
                          loss.padded_encodings, loss.gradient_evaluations};
  return result;
}

}  // namespace ttp
