#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttp/attacks.hpp"
#include "ttp/detector.hpp"
#include "ttp/harness/dataset.hpp"
#include "ttp/harness/records.hpp"
#include "ttp/log.hpp"
#include "ttp/pipeline.hpp"
#include "ttp/random.hpp"

namespace ttp::harness {

struct BenchmarkConfig {
  TtpConfig ttp{};
  std::optional<AttackConfig> attack = AttackConfig{};  // nullopt: clean evaluation only
  std::uint64_t seed = 0;
  int workers = 1;
};

struct BenchmarkResult {
  MetricsSummary summary;
  std::vector<EvaluationRecord> records;
};

/// Called once per record, in sample order, from one thread at a time.
using RecordSink = std::function<void(const EvaluationRecord&)>;

/// Seed for a sample, derived from its id so that it does not depend on the
/// sample's position in the run or on scheduling.
inline std::uint64_t sample_seed(std::uint64_t run_seed, const std::string& sample_id) {
  return derive_seed(run_seed, fnv1a(sample_id));
}

namespace streams {
inline constexpr std::uint64_t kAttackStream = 0xa7;
inline constexpr std::uint64_t kAttackedPredictStream = 0xa8;
}  // namespace streams

inline AttackConfig attack_for_sample(const AttackConfig& base, std::uint64_t seed) {
  AttackConfig cfg = base;
  cfg.seed = derive_seed(seed, streams::kAttackStream);
  return cfg;
}

inline EvaluationRecord make_record(const LabeledImage& sample, std::string attack, const PredictionOutcome& o) {
  EvaluationRecord r;
  r.sample_id = sample.id;
  r.true_label = sample.label;
  r.attack = std::move(attack);
  r.similarity = o.similarity;
  r.verdict = o.verdict.label;
  r.predicted_class = o.predicted_class;
  r.correct = o.predicted_class == sample.label;
  r.zero_shot_entropy = o.zero_shot_entropy;
  r.loss_before = o.loss_before;
  r.loss_after = o.loss_after;
  r.adaptation_steps = o.adaptation_steps;
  r.selected_views = o.selected_view_count;
  r.degraded = o.degraded;
  r.wall_time_ms = std::chrono::duration<double, std::milli>(o.wall_time).count();
  return r;
}

inline EvaluationRecord failed_record(const LabeledImage& sample, std::string attack, std::string error) {
  EvaluationRecord r;
  r.sample_id = sample.id;
  r.true_label = sample.label;
  r.attack = std::move(attack);
  r.error = std::move(error);
  return r;
}

/// Evaluates each sample clean and, when an attack is configured, attacked,
/// emitting one record per evaluation. Per-sample failures become failed
/// records and the run continues.
inline BenchmarkResult run_benchmark(EncoderHandle encoder, const ClassPrototypeSet& protos,
                                     std::span<const LabeledImage> samples, const BenchmarkConfig& cfg,
                                     const RecordSink& sink = {}) {
  const TtpPredictor predictor(encoder, protos, cfg.ttp);
  if (cfg.attack) cfg.attack->validate();
  const std::size_t per_sample = cfg.attack ? 2 : 1;
  const std::string attack_name = cfg.attack ? std::string(to_string(cfg.attack->kind)) : "none";

  std::vector<std::vector<EvaluationRecord>> slots(samples.size());
  std::vector<bool> ready(samples.size(), false);
  std::size_t next_emit = 0;
  std::mutex emit_mutex;

  parallel_for(samples.size(), cfg.workers, [&](std::size_t i) {
    const LabeledImage& s = samples[i];
    const std::uint64_t seed = sample_seed(cfg.seed, s.id);
    std::vector<EvaluationRecord> recs;
    try {
      recs.push_back(make_record(s, "none", predictor.predict(s.image, seed)));
    } catch (const std::exception& e) {
      recs.push_back(failed_record(s, "none", e.what()));
    }
    if (cfg.attack) {
      try {
        const Image adv = run_attack(*encoder, protos, cfg.ttp.classifier, s.image, s.label,
                                     attack_for_sample(*cfg.attack, seed));
        recs.push_back(make_record(s, attack_name,
                                   predictor.predict(adv, derive_seed(seed, streams::kAttackedPredictStream))));
      } catch (const std::exception& e) {
        recs.push_back(failed_record(s, attack_name, e.what()));
      }
    }
    std::lock_guard lock(emit_mutex);
    slots[i] = std::move(recs);
    ready[i] = true;
    for (; next_emit < samples.size() && ready[next_emit]; ++next_emit)
      if (sink)
        for (const auto& r : slots[next_emit]) sink(r);
  });

  BenchmarkResult result;
  result.records.reserve(samples.size() * per_sample);
  for (auto& s : slots)
    for (auto& r : s) result.records.push_back(std::move(r));
  for (const auto& r : result.records)
    if (r.failed()) log::warn("sample " + r.sample_id + " (" + r.attack + ") failed: " + r.error);
  if (!result.records.empty()) result.summary = compute_metrics(result.records);
  return result;
}

/// Attacked copies of `samples` (ids and labels preserved).
inline std::vector<LabeledImage> make_attacked_pool(const ImageEncoder& encoder, const ClassPrototypeSet& protos,
                                                    const ClassifierConfig& cls, std::span<const LabeledImage> samples,
                                                    const AttackConfig& attack, std::uint64_t run_seed, int workers = 1) {
  attack.validate();
  std::vector<LabeledImage> out(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    const auto& s = samples[i];
    out[i] = {s.id, s.label,
              run_attack(encoder, protos, cls, s.image, s.label, attack_for_sample(attack, sample_seed(run_seed, s.id)))};
  });
  return out;
}

inline std::vector<double> similarity_pool(const ImageEncoder& encoder, std::span<const LabeledImage> pool,
                                           const DetectorConfig& cfg, int workers = 1) {
  std::vector<double> sims(pool.size());
  parallel_for(pool.size(), workers, [&](std::size_t i) { sims[i] = similarity_shift(encoder, pool[i].image, cfg); });
  return sims;
}

struct PadSweepRow {
  int pad_size = 0;
  double clean_similarity = 0.0;        // mean over the clean pool
  double adversarial_similarity = 0.0;  // mean over the attacked pool
  double detection_accuracy = 0.0;      // percent, at the configured threshold
  std::optional<double> robust_accuracy;  // percent over the attacked pool
};

inline double mean(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

/// For each padding size: mean clean/attacked similarity shift, detection
/// accuracy at the configured threshold and, optionally, robust accuracy of
/// the full pipeline with both frames set to that size.
inline std::vector<PadSweepRow> sweep_padding_size(EncoderHandle encoder, const ClassPrototypeSet& protos,
                                                   std::span<const LabeledImage> clean_pool,
                                                   std::span<const LabeledImage> adv_pool, const BenchmarkConfig& cfg,
                                                   std::span<const int> sizes, bool with_robust = true) {
  detail::require(!sizes.empty(), "sweep_padding_size: no sizes given");
  detail::require(!clean_pool.empty() && !adv_pool.empty(), "sweep_padding_size: both pools must be non-empty");
  std::vector<PadSweepRow> rows;
  for (int size : sizes) {
    detail::require(size >= 0, "sweep_padding_size: negative padding size");
    DetectorConfig det = cfg.ttp.detector;
    det.pad_width = size;
    const auto clean_sims = similarity_pool(*encoder, clean_pool, det, cfg.workers);
    const auto adv_sims = similarity_pool(*encoder, adv_pool, det, cfg.workers);
    PadSweepRow row;
    row.pad_size = size;
    row.clean_similarity = mean(clean_sims);
    row.adversarial_similarity = mean(adv_sims);
    row.detection_accuracy = 100.0 * detection_accuracy(clean_sims, adv_sims, det.threshold);
    if (with_robust) {
      TtpConfig tcfg = cfg.ttp;
      tcfg.detector = det;
      tcfg.pad_width = std::max(size, 1);
      const TtpPredictor predictor(encoder, protos, tcfg);
      std::vector<int> correct(adv_pool.size(), 0);
      parallel_for(adv_pool.size(), cfg.workers, [&](std::size_t i) {
        const auto& s = adv_pool[i];
        const auto seed = derive_seed(sample_seed(cfg.seed, s.id), streams::kAttackedPredictStream);
        correct[i] = predictor.predict(s.image, seed).predicted_class == s.label ? 1 : 0;
      });
      std::size_t n = 0;
      for (int c : correct) n += static_cast<std::size_t>(c);
      row.robust_accuracy = percent(n, adv_pool.size());
    }
    rows.push_back(row);
  }
  return rows;
}

struct ThresholdSweep {
  CalibrationResult calibration;
  std::vector<double> clean_similarities;
  std::vector<double> adversarial_similarities;
};

inline ThresholdSweep sweep_threshold(const ImageEncoder& encoder, std::span<const LabeledImage> clean_pool,
                                      std::span<const LabeledImage> adv_pool, const DetectorConfig& det,
                                      std::span<const double> grid, int workers = 1) {
  ThresholdSweep out;
  out.clean_similarities = similarity_pool(encoder, clean_pool, det, workers);
  out.adversarial_similarities = similarity_pool(encoder, adv_pool, det, workers);
  out.calibration = calibrate_threshold(out.clean_similarities, out.adversarial_similarities, grid);
  return out;
}

}  // namespace ttp::harness
