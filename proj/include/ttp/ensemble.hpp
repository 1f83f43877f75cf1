#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "ttp/encoder.hpp"
#include "ttp/errors.hpp"
#include "ttp/zero_shot.hpp"

namespace ttp {

struct ViewScore {
  double alpha = 0.0;   // cos(z_i^pad, z_adv^pad)
  double beta = 0.0;    // cos(z_i^pad, z_adv)
  double score = 0.0;   // alpha - beta
  double weight = 0.0;  // filled by the caller after softmax_weights
};

/// Scores padded views: close to the padded adversarial embedding is good,
/// close to the raw adversarial embedding is bad.
inline std::vector<ViewScore> view_scores(std::span<const Embedding> padded_views, const Embedding& z_adv,
                                          const Embedding& z_adv_pad) {
  std::vector<ViewScore> out;
  out.reserve(padded_views.size());
  for (const Embedding& z : padded_views) {
    ViewScore s;
    s.alpha = cosine_similarity(z, z_adv_pad);
    s.beta = cosine_similarity(z, z_adv);
    s.score = s.alpha - s.beta;
    out.push_back(s);
  }
  return out;
}

inline std::vector<double> softmax_weights(std::span<const double> scores) {
  detail::require(!scores.empty(), "softmax_weights: empty score list");
  for (double s : scores) detail::require(std::isfinite(s), "softmax_weights: non-finite score");
  return softmax(scores).probs;
}

inline std::vector<double> softmax_weights(std::vector<ViewScore>& scores) {
  std::vector<double> raw;
  raw.reserve(scores.size());
  for (const auto& s : scores) raw.push_back(s.score);
  auto w = softmax_weights(raw);
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i].weight = w[i];
  return w;
}

struct EnsemblePrediction {
  std::size_t predicted_class = 0;
  ProbabilityVector mixture;
};

/// mixture = sum_i w_i p_i; prediction = argmax with ties to the lowest index.
inline EnsemblePrediction aggregate_prediction(std::span<const double> weights,
                                               std::span<const ProbabilityVector> view_probs) {
  detail::require(!weights.empty() && weights.size() == view_probs.size(),
                  "aggregate_prediction: weights and probabilities must have the same non-zero length");
  double total = 0.0;
  for (double w : weights) total += w;
  detail::require(std::abs(total - 1.0) <= 1e-6, "aggregate_prediction: weights must sum to 1");
  const std::size_t classes = view_probs.front().size();
  EnsemblePrediction out;
  out.mixture.probs.assign(classes, 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    detail::require(view_probs[i].size() == classes, "aggregate_prediction: class count mismatch");
    for (std::size_t c = 0; c < classes; ++c) out.mixture.probs[c] += weights[i] * view_probs[i][c];
  }
  out.predicted_class = argmax(out.mixture);
  return out;
}

}  // namespace ttp
