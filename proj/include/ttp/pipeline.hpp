#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ttp/adapter.hpp"
#include "ttp/detector.hpp"
#include "ttp/encoder.hpp"
#include "ttp/ensemble.hpp"
#include "ttp/errors.hpp"
#include "ttp/log.hpp"
#include "ttp/padding.hpp"
#include "ttp/random.hpp"
#include "ttp/zero_shot.hpp"

namespace ttp {

/// Prediction strategy for inputs the detector calls clean. Receives the
/// embedding already computed for detection so the default costs nothing extra.
using CleanBranchStrategy = std::function<ProbabilityVector(
    const ImageEncoder&, const ClassPrototypeSet&, const ClassifierConfig&, const Image&, const Embedding&)>;

inline constexpr std::string_view kZeroShotStrategy = "zero-shot";

class CleanBranchRegistry {
 public:
  CleanBranchRegistry() {
    add(std::string(kZeroShotStrategy),
        [](const ImageEncoder&, const ClassPrototypeSet& protos, const ClassifierConfig& cls, const Image&,
           const Embedding& z) { return classify(z, protos, cls); });
  }

  void add(std::string id, CleanBranchStrategy strategy) {
    detail::require(static_cast<bool>(strategy), "clean-branch strategy '" + id + "' is empty");
    strategies_[std::move(id)] = std::move(strategy);
  }

  bool contains(const std::string& id) const { return strategies_.count(id) != 0; }

  const CleanBranchStrategy& get(const std::string& id) const {
    auto it = strategies_.find(id);
    if (it == strategies_.end()) throw ConfigError("unknown clean-branch strategy '" + id + "'");
    return it->second;
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : strategies_) out.push_back(id);
    return out;
  }

  static const CleanBranchRegistry& builtin() {
    static const CleanBranchRegistry registry;
    return registry;
  }

 private:
  std::map<std::string, CleanBranchStrategy> strategies_;
};

inline ProbabilityVector clean_branch_hook(const std::string& strategy_id, const ImageEncoder& encoder,
                                           const ClassPrototypeSet& protos, const Image& image,
                                           const ClassifierConfig& cls = {},
                                           const CleanBranchRegistry& registry = CleanBranchRegistry::builtin()) {
  return registry.get(strategy_id)(encoder, protos, cls, image, encoder.encode_image(image));
}

struct TtpConfig {
  DetectorConfig detector{};
  AdaptationConfig adaptation{};
  ClassifierConfig classifier{};
  int pad_width = 32;  // trainable frame
  std::string clean_branch_hook{kZeroShotStrategy};

  void validate(const CleanBranchRegistry& registry = CleanBranchRegistry::builtin()) const {
    try {
      detector.validate();
      adaptation.validate();
      classifier.validate();
      detail::require(pad_width >= 1, "trainable pad_width must be >= 1");
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    if (!registry.contains(clean_branch_hook))
      throw ConfigError("unknown clean-branch strategy '" + clean_branch_hook + "'");
  }
};

struct PredictionOutcome {
  std::size_t predicted_class = 0;
  Verdict verdict{};
  double similarity = 1.0;
  ProbabilityVector probabilities;          // final class probabilities
  std::optional<ProbabilityVector> mixture;  // adversarial branch only
  std::size_t selected_view_count = 0;
  int adaptation_steps = 0;
  double zero_shot_entropy = 0.0;
  std::optional<double> loss_before;  // mean padded entropy of B before the step
  std::optional<double> loss_after;   // ... and after it
  std::size_t gradient_evaluations = 0;
  std::size_t padded_view_encodings = 0;
  bool degraded = false;
  std::string warning;
  std::chrono::nanoseconds wall_time{0};
};

namespace detail {
inline constexpr std::uint64_t kPaddingStream = 0x70;
inline constexpr std::uint64_t kViewStream = 0x71;
}  // namespace detail

/// Detect, route, adapt, ensemble.
class TtpPredictor {
 public:
  TtpPredictor(EncoderHandle encoder, ClassPrototypeSet protos, TtpConfig cfg,
               const CleanBranchRegistry& registry = CleanBranchRegistry::builtin())
      : encoder_(std::move(encoder)), protos_(std::move(protos)), cfg_(std::move(cfg)) {
    detail::require<ConfigError>(encoder_ != nullptr, "predictor needs an encoder");
    cfg_.validate(registry);
    detail::require<ConfigError>(protos_.dim() == static_cast<std::size_t>(encoder_->embed_dim()),
                                 "prototype dimension does not match encoder");
    clean_strategy_ = registry.get(cfg_.clean_branch_hook);
  }

  const TtpConfig& config() const noexcept { return cfg_; }
  const ClassPrototypeSet& prototypes() const noexcept { return protos_; }
  const ImageEncoder& encoder() const noexcept { return *encoder_; }

  PredictionOutcome predict(const Image& image, std::uint64_t seed) const {
    validate_pixels(image);
    const auto start = std::chrono::steady_clock::now();
    const ImageEncoder& enc = *encoder_;
    const ShiftMeasurement shift = measure_similarity_shift(enc, image, cfg_.detector);

    PredictionOutcome out;
    out.similarity = shift.similarity;
    out.verdict = detect(shift.similarity, cfg_.detector);
    const ProbabilityVector zero_shot = classify(shift.plain, protos_, cfg_.classifier);
    out.zero_shot_entropy = entropy(zero_shot);

    if (out.verdict.is_clean()) {
      out.probabilities = clean_strategy_(enc, protos_, cfg_.classifier, image, shift.plain);
    } else {
      try {
        adversarial_branch(image, shift.plain, seed, out);
      } catch (const std::exception& e) {
        out.degraded = true;
        out.warning = std::string("adaptation failed, using zero-shot prediction: ") + e.what();
        out.mixture.reset();
        out.probabilities = zero_shot;
        log::warn(out.warning);
      }
    }
    out.predicted_class = argmax(out.probabilities);
    out.wall_time = std::chrono::steady_clock::now() - start;
    return out;
  }

 private:
  void adversarial_branch(const Image& image, const Embedding& z_adv, std::uint64_t seed,
                          PredictionOutcome& out) const {
    const ImageEncoder& enc = *encoder_;
    const TrainablePadding init = init_trainable_padding(cfg_.pad_width, image.height(), image.width(),
                                                         derive_seed(seed, detail::kPaddingStream));
    AdaptationConfig acfg = cfg_.adaptation;
    acfg.seed = derive_seed(seed, detail::kViewStream);
    AdaptationResult adapted = adapt_padding(enc, protos_, cfg_.classifier, image, acfg, init);
    out.adaptation_steps = adapted.updates;
    out.gradient_evaluations = adapted.gradient_evaluations;
    out.padded_view_encodings = adapted.padded_encodings;
    out.loss_before = adapted.loss_before;
    out.selected_view_count = adapted.batch.selected.size();

    const TrainablePadding& pad = adapted.padding;
    const Embedding z_adv_pad = enc.encode_image(pad.apply(image));
    std::vector<Embedding> padded;
    std::vector<ProbabilityVector> probs;
    double loss_after = 0.0;
    for (std::size_t idx : adapted.batch.selected) {
      padded.push_back(enc.encode_image(pad.apply(adapted.batch.views[idx])));
      ++out.padded_view_encodings;
      probs.push_back(classify(padded.back(), protos_, cfg_.classifier));
      loss_after += entropy(probs.back());
    }
    out.loss_after = loss_after / static_cast<double>(probs.size());

    auto scores = view_scores(padded, z_adv, z_adv_pad);
    const auto weights = softmax_weights(scores);
    EnsemblePrediction ens = aggregate_prediction(weights, probs);
    out.probabilities = ens.mixture;
    out.mixture = std::move(ens.mixture);
  }

  EncoderHandle encoder_;
  ClassPrototypeSet protos_;
  TtpConfig cfg_;
  CleanBranchStrategy clean_strategy_;
};

inline PredictionOutcome ttp_predict(EncoderHandle encoder, const ClassPrototypeSet& protos, const TtpConfig& cfg,
                                     const Image& image, std::uint64_t seed) {
  return TtpPredictor(std::move(encoder), protos, cfg).predict(image, seed);
}

/// Outcome or the error that prevented one.
struct BatchItem {
  std::optional<PredictionOutcome> outcome;
  std::string error;

  bool ok() const noexcept { return outcome.has_value(); }
};

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads. Each index is
/// handled exactly once; the caller owns per-index result storage.
template <class F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  const auto threads = static_cast<std::size_t>(std::clamp<std::size_t>(workers < 1 ? 1 : workers, 1, n ? n : 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

inline std::vector<BatchItem> batch_predict(const TtpPredictor& predictor, std::span<const Image> images,
                                            std::span<const std::uint64_t> seeds, int workers = 1) {
  detail::require(images.size() == seeds.size(), "batch_predict: images and seeds differ in length");
  std::vector<BatchItem> out(images.size());
  parallel_for(images.size(), workers, [&](std::size_t i) {
    try {
      out[i].outcome = predictor.predict(images[i], seeds[i]);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  });
  return out;
}

inline std::vector<BatchItem> batch_predict(EncoderHandle encoder, const ClassPrototypeSet& protos,
                                            const TtpConfig& cfg, std::span<const Image> images,
                                            std::span<const std::uint64_t> seeds, int workers = 1) {
  return batch_predict(TtpPredictor(std::move(encoder), protos, cfg), images, seeds, workers);
}

}  // namespace ttp
