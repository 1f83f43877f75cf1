#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "ttp/encoder.hpp"
#include "ttp/errors.hpp"
#include "ttp/padding.hpp"
#include "ttp/zero_shot.hpp"

namespace ttp {

struct DetectorConfig {
  double threshold = 0.8;
  PaddingPattern pattern{};
  int pad_width = 32;

  // Thresholds of exactly -1 and +1 are accepted: they force every sample
  // down one branch, which is how the routing degeneracy checks work.
  void validate() const {
    detail::require(std::isfinite(threshold) && threshold >= -1.0 && threshold <= 1.0,
                    "detection threshold must lie in [-1, 1]");
    detail::require(pad_width >= 0, "detection pad_width must be >= 0");
  }
};

enum class VerdictLabel { clean, adversarial };

inline std::string_view to_string(VerdictLabel label) {
  return label == VerdictLabel::clean ? "clean" : "adversarial";
}

struct Verdict {
  VerdictLabel label = VerdictLabel::clean;
  double similarity = 1.0;

  bool is_clean() const noexcept { return label == VerdictLabel::clean; }
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Both embeddings behind a similarity-shift measurement, so callers can
/// reuse z = F(x) after routing.
struct ShiftMeasurement {
  Embedding plain;
  Embedding padded;
  double similarity = 1.0;
};

inline ShiftMeasurement measure_similarity_shift(const ImageEncoder& encoder, const Image& image,
                                                 const DetectorConfig& cfg) {
  cfg.validate();
  ShiftMeasurement m;
  m.plain = encoder.encode_image(image);
  m.padded = encoder.encode_image(apply_fixed_padding(image, cfg.pattern, cfg.pad_width));
  m.similarity = cosine_similarity(m.plain, m.padded);
  return m;
}

/// s = cos(F(x), F(P_fix(x))).
inline double similarity_shift(const ImageEncoder& encoder, const Image& image, const DetectorConfig& cfg = {}) {
  return measure_similarity_shift(encoder, image, cfg).similarity;
}

/// Clean iff s > threshold (strict).
inline Verdict detect(double similarity, const DetectorConfig& cfg = {}) {
  return {similarity > cfg.threshold ? VerdictLabel::clean : VerdictLabel::adversarial, similarity};
}

struct ThresholdPoint {
  double threshold;
  double accuracy;
};

struct CalibrationResult {
  double best_threshold = 0.0;
  double best_accuracy = 0.0;
  std::vector<ThresholdPoint> curve;
};

/// Fraction of the pooled set classified correctly at `threshold`.
inline double detection_accuracy(std::span<const double> clean_sims, std::span<const double> adv_sims,
                                 double threshold) {
  detail::require(!clean_sims.empty() || !adv_sims.empty(), "detection_accuracy: no samples");
  std::size_t correct = 0;
  for (double s : clean_sims) correct += s > threshold ? 1 : 0;
  for (double s : adv_sims) correct += s <= threshold ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(clean_sims.size() + adv_sims.size());
}

/// Scans `grid`, returning the accuracy curve and the best threshold. Ties
/// among maximizers go to the median grid value (lower median for even counts).
inline CalibrationResult calibrate_threshold(std::span<const double> clean_sims, std::span<const double> adv_sims,
                                             std::span<const double> grid) {
  detail::require(!clean_sims.empty(), "calibrate_threshold: clean similarity list is empty");
  detail::require(!adv_sims.empty(), "calibrate_threshold: adversarial similarity list is empty");
  detail::require(!grid.empty(), "calibrate_threshold: threshold grid is empty");

  CalibrationResult result;
  result.curve.reserve(grid.size());
  for (double t : grid) result.curve.push_back({t, detection_accuracy(clean_sims, adv_sims, t)});

  result.best_accuracy =
      std::max_element(result.curve.begin(), result.curve.end(),
                       [](const auto& a, const auto& b) { return a.accuracy < b.accuracy; })
          ->accuracy;
  std::vector<double> maximizers;
  for (const auto& p : result.curve)
    if (p.accuracy == result.best_accuracy) maximizers.push_back(p.threshold);
  std::sort(maximizers.begin(), maximizers.end());
  result.best_threshold = maximizers[(maximizers.size() - 1) / 2];
  return result;
}

/// Evenly spaced inclusive grid, computed as lo + i * step to avoid drift.
inline std::vector<double> make_grid(double lo, double hi, double step) {
  detail::require(step > 0.0 && hi >= lo, "make_grid: need step > 0 and hi >= lo");
  std::vector<double> grid;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) grid.push_back(lo + static_cast<double>(i) * step);
  return grid;
}

}  // namespace ttp
