#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttp/encoder.hpp"
#include "ttp/errors.hpp"
#include "ttp/log.hpp"

namespace ttp {

inline constexpr std::string_view kDefaultTemplate = "a photo of a [CLASS].";
inline constexpr std::string_view kClassPlaceholder = "[CLASS]";

/// Text-derived class embeddings, one row per class name.
struct ClassPrototypeSet {
  std::vector<Embedding> prototypes;
  std::vector<std::string> class_names;
  std::string prompt_template;

  std::size_t num_classes() const noexcept { return prototypes.size(); }
  std::size_t dim() const noexcept { return prototypes.empty() ? 0 : prototypes.front().dim(); }
};

struct ProbabilityVector {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;
};

struct ClassifierConfig {
  double temperature = 0.01;

  void validate() const {
    detail::require(temperature > 0.0 && std::isfinite(temperature), "classifier temperature must be > 0");
  }
};

inline std::string fill_template(std::string_view prompt_template, std::string_view class_name) {
  std::string out(prompt_template);
  out.replace(out.find(kClassPlaceholder), kClassPlaceholder.size(), class_name);
  return out;
}

inline ClassPrototypeSet encode_text_prototypes(const ImageEncoder& encoder, std::vector<std::string> class_names,
                                                std::string_view prompt_template = kDefaultTemplate) {
  detail::require(!class_names.empty(), "class name list is empty");
  const auto first = prompt_template.find(kClassPlaceholder);
  detail::require(first != std::string_view::npos &&
                      prompt_template.find(kClassPlaceholder, first + 1) == std::string_view::npos,
                  "prompt template must contain exactly one [CLASS] placeholder: '" +
                      std::string(prompt_template) + "'");
  std::set<std::string> seen;
  for (const auto& name : class_names)
    if (!seen.insert(name).second) log::warn("duplicate class name '" + name + "' in prototype set");

  ClassPrototypeSet set;
  set.prompt_template = prompt_template;
  set.prototypes.reserve(class_names.size());
  for (const auto& name : class_names) set.prototypes.push_back(encoder.encode_text(fill_template(prompt_template, name)));
  set.class_names = std::move(class_names);
  return set;
}

namespace detail {

inline double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace detail

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size(), "cosine_similarity: dimension mismatch");
  const double na = detail::norm2(a);
  const double nb = detail::norm2(b);
  if (!(na > 0.0) || !(nb > 0.0) || !std::isfinite(na) || !std::isfinite(nb))
    throw DegenerateInput("cosine_similarity: zero-norm or non-finite vector");
  return std::clamp(detail::dot(a, b) / (na * nb), -1.0, 1.0);
}

inline double cosine_similarity(const Embedding& a, const Embedding& b) { return cosine_similarity(a.values, b.values); }

/// d cos(a, b) / d a, accumulated into `out` with the given scale.
inline void accumulate_cosine_gradient(std::span<const double> a, std::span<const double> b, double scale,
                                       std::span<double> out) {
  const double na = detail::norm2(a);
  const double nb = detail::norm2(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateInput("cosine gradient: zero-norm vector");
  const double cos = detail::dot(a, b) / (na * nb);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += scale * (b[i] / (na * nb) - cos * a[i] / (na * na));
}

/// Max-subtracted softmax.
inline ProbabilityVector softmax(std::span<const double> logits) {
  detail::require(!logits.empty(), "softmax of an empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  ProbabilityVector p;
  p.probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (p.probs[i] = std::exp(logits[i] - m));
  for (double& v : p.probs) v /= sum;
  return p;
}

inline std::vector<double> zero_shot_logits(const Embedding& f, const ClassPrototypeSet& protos,
                                            const ClassifierConfig& cfg) {
  cfg.validate();
  detail::require(protos.num_classes() > 0, "prototype set is empty");
  detail::require(f.dim() == protos.dim(), "embedding dimension " + std::to_string(f.dim()) +
                                               " does not match prototype dimension " + std::to_string(protos.dim()));
  std::vector<double> logits(protos.num_classes());
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] = cosine_similarity(f, protos.prototypes[c]) / cfg.temperature;
  return logits;
}

/// p_c = softmax over classes of cos(f, g_c) / temperature.
inline ProbabilityVector classify(const Embedding& f, const ClassPrototypeSet& protos, const ClassifierConfig& cfg = {}) {
  return softmax(zero_shot_logits(f, protos, cfg));
}

/// Lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
  detail::require(!v.empty(), "argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline std::size_t argmax(const ProbabilityVector& p) { return argmax(p.probs); }

/// Gradient of <cotangent, logits(f)> with respect to f.
inline std::vector<double> logits_embedding_vjp(const Embedding& f, const ClassPrototypeSet& protos,
                                                const ClassifierConfig& cfg, std::span<const double> cotangent) {
  std::vector<double> grad(f.dim(), 0.0);
  for (std::size_t c = 0; c < protos.num_classes(); ++c)
    if (cotangent[c] != 0.0)
      accumulate_cosine_gradient(f.values, protos.prototypes[c].values, cotangent[c] / cfg.temperature, grad);
  return grad;
}

/// A differentiable image classifier exposing logits and their input gradients.
template <class M>
concept LogitModel = requires(const M& m, const Image& x, std::span<const double> cot) {
  { m.num_classes() } -> std::convertible_to<std::size_t>;
  { m.logits(x) } -> std::convertible_to<std::vector<double>>;
  { m.logits_vjp(x, cot) } -> std::same_as<Image>;
};

/// The zero-shot cosine classifier viewed as a LogitModel over raw pixels.
class ZeroShotModel {
 public:
  ZeroShotModel(const ImageEncoder& encoder, const ClassPrototypeSet& protos, ClassifierConfig cfg = {})
      : encoder_(&encoder), protos_(&protos), cfg_(cfg) {
    cfg_.validate();
    detail::require(protos.dim() == static_cast<std::size_t>(encoder.embed_dim()),
                    "prototype dimension does not match encoder embedding dimension");
  }

  std::size_t num_classes() const noexcept { return protos_->num_classes(); }

  std::vector<double> logits(const Image& x) const {
    return zero_shot_logits(encoder_->encode_image(x), *protos_, cfg_);
  }

  Image logits_vjp(const Image& x, std::span<const double> cotangent) const {
    detail::require(cotangent.size() == num_classes(), "logits_vjp: cotangent size mismatch");
    const Embedding f = encoder_->encode_image(x);
    const auto grad_f = logits_embedding_vjp(f, *protos_, cfg_, cotangent);
    return encoder_->embedding_vjp(x, grad_f);
  }

 private:
  const ImageEncoder* encoder_;
  const ClassPrototypeSet* protos_;
  ClassifierConfig cfg_;
};

static_assert(LogitModel<ZeroShotModel>);

}  // namespace ttp
