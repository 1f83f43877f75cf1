#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttp/detector.hpp"
#include "ttp/errors.hpp"

namespace ttp::harness {

/// One evaluation of one sample (clean or attacked) through the pipeline.
struct EvaluationRecord {
  std::string sample_id;
  std::size_t true_label = 0;
  std::string attack = "none";
  double similarity = 1.0;
  VerdictLabel verdict = VerdictLabel::clean;
  std::size_t predicted_class = 0;
  bool correct = false;
  double zero_shot_entropy = 0.0;
  std::optional<double> loss_before;
  std::optional<double> loss_after;
  int adaptation_steps = 0;
  std::size_t selected_views = 0;
  bool degraded = false;
  std::string error;         // non-empty: the evaluation failed
  double wall_time_ms = 0.0;  // kept out of the persisted record

  bool failed() const noexcept { return !error.empty(); }
  bool attacked() const noexcept { return attack != "none"; }

  friend bool operator==(const EvaluationRecord&, const EvaluationRecord&) = default;
};

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const EvaluationRecord& r) {
  ordered_json j;
  j["sample_id"] = r.sample_id;
  j["true_label"] = r.true_label;
  j["attack"] = r.attack;
  j["similarity"] = r.similarity;
  j["verdict"] = std::string(to_string(r.verdict));
  j["predicted_class"] = r.predicted_class;
  j["correct"] = r.correct;
  j["zero_shot_entropy"] = r.zero_shot_entropy;
  j["loss_before"] = r.loss_before ? ordered_json(*r.loss_before) : ordered_json(nullptr);
  j["loss_after"] = r.loss_after ? ordered_json(*r.loss_after) : ordered_json(nullptr);
  j["adaptation_steps"] = r.adaptation_steps;
  j["selected_views"] = r.selected_views;
  j["degraded"] = r.degraded;
  j["error"] = r.error;
  return j;
}

inline EvaluationRecord record_from_json(const ordered_json& j) {
  EvaluationRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.true_label = j.at("true_label").get<std::size_t>();
  r.attack = j.at("attack").get<std::string>();
  r.similarity = j.at("similarity").get<double>();
  r.verdict = j.at("verdict").get<std::string>() == "clean" ? VerdictLabel::clean : VerdictLabel::adversarial;
  r.predicted_class = j.at("predicted_class").get<std::size_t>();
  r.correct = j.at("correct").get<bool>();
  r.zero_shot_entropy = j.at("zero_shot_entropy").get<double>();
  if (!j.at("loss_before").is_null()) r.loss_before = j.at("loss_before").get<double>();
  if (!j.at("loss_after").is_null()) r.loss_after = j.at("loss_after").get<double>();
  r.adaptation_steps = j.at("adaptation_steps").get<int>();
  r.selected_views = j.at("selected_views").get<std::size_t>();
  r.degraded = j.at("degraded").get<bool>();
  r.error = j.at("error").get<std::string>();
  return r;
}

inline std::string to_json_line(const EvaluationRecord& r) { return to_json(r).dump(); }

inline void write_records_jsonl(const std::filesystem::path& path, const std::vector<EvaluationRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write records file " + path.string());
  for (const auto& r : records) out << to_json_line(r) << '\n';
  if (!out) throw IoError("failed while writing " + path.string());
}

inline std::vector<EvaluationRecord> read_records_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read records file " + path.string());
  std::vector<EvaluationRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(ordered_json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

struct ClassBreakdown {
  std::size_t label = 0;
  std::size_t clean_total = 0;
  std::size_t clean_correct = 0;
  std::size_t attacked_total = 0;
  std::size_t attacked_correct = 0;

  friend bool operator==(const ClassBreakdown&, const ClassBreakdown&) = default;
};

/// Acc. / Rob. / detection as percentages; absent when the pool is empty.
struct MetricsSummary {
  std::optional<double> clean_accuracy;
  std::optional<double> robust_accuracy;
  std::optional<double> detection_accuracy;
  std::size_t n_clean = 0;
  std::size_t n_clean_correct = 0;
  std::size_t n_attacked = 0;
  std::size_t n_attacked_correct = 0;
  std::size_t n_detect_correct = 0;
  std::size_t failures = 0;
  std::vector<ClassBreakdown> per_class;

  std::size_t evaluated() const noexcept { return n_clean + n_attacked; }
  friend bool operator==(const MetricsSummary&, const MetricsSummary&) = default;
};

inline double percent(std::size_t num, std::size_t den) {
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

/// Failed records are counted and excluded from every rate.
inline MetricsSummary compute_metrics(const std::vector<EvaluationRecord>& records) {
  detail::require(!records.empty(), "compute_metrics: no records");
  MetricsSummary m;
  std::size_t max_label = 0;
  for (const auto& r : records) max_label = std::max(max_label, r.true_label);
  m.per_class.resize(max_label + 1);
  for (std::size_t c = 0; c < m.per_class.size(); ++c) m.per_class[c].label = c;

  for (const auto& r : records) {
    if (r.failed()) {
      ++m.failures;
      continue;
    }
    auto& cls = m.per_class[r.true_label];
    const bool detected_right = r.attacked() ? r.verdict == VerdictLabel::adversarial : r.verdict == VerdictLabel::clean;
    m.n_detect_correct += detected_right ? 1 : 0;
    if (r.attacked()) {
      ++m.n_attacked;
      ++cls.attacked_total;
      m.n_attacked_correct += r.correct ? 1 : 0;
      cls.attacked_correct += r.correct ? 1 : 0;
    } else {
      ++m.n_clean;
      ++cls.clean_total;
      m.n_clean_correct += r.correct ? 1 : 0;
      cls.clean_correct += r.correct ? 1 : 0;
    }
  }
  if (m.n_clean) m.clean_accuracy = percent(m.n_clean_correct, m.n_clean);
  if (m.n_attacked) m.robust_accuracy = percent(m.n_attacked_correct, m.n_attacked);
  if (m.evaluated()) m.detection_accuracy = percent(m.n_detect_correct, m.evaluated());
  return m;
}

}  // namespace ttp::harness
