#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ttp/errors.hpp"
#include "ttp/harness/benchmark.hpp"
#include "ttp/harness/plot.hpp"
#include "ttp/harness/records.hpp"

namespace ttp::harness {

inline constexpr const char* kSummaryHeader = "dataset,backbone,attack,eps,Acc,Rob,Det,n,failures";

/// Reference detection accuracy (percent) of white-frame detection averaged
/// over eight fine-grained datasets with a ViT-B/32 backbone. Documented for
/// comparison with full-scale runs; not reproducible with the toy backend.
inline constexpr double kReferenceWhiteDetectionAccuracy = 98.7;

struct RunInfo {
  std::string dataset;
  std::string backbone;
  std::string attack = "none";
  double eps_levels = 0.0;  // epsilon in 8-bit intensity levels
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v, const char* fmt = "%.4f") {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, fmt, *v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed while writing " + path.string());
}

inline void write_table_csv(const std::filesystem::path& path, const Table& table) {
  std::ostringstream os;
  for (std::size_t i = 0; i < table.header.size(); ++i) os << (i ? "," : "") << table.header[i];
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
    os << '\n';
  }
  write_text(path, os.str());
}

/// Reads a numeric CSV with one header row. Empty cells read as NaN.
inline Table read_table_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read table " + path.string());
  Table t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw IoError("empty table " + path.string());
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line)) {
      if (cell.empty()) {
        row.push_back(std::nan(""));
        continue;
      }
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell '" + cell + "'");
      }
    }
    if (row.size() != t.header.size())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                    " columns");
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Quotes a CSV cell when it contains a separator, quote or newline.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string summary_csv(const RunInfo& info, const MetricsSummary& m, std::size_t record_count) {
  std::ostringstream os;
  os << kSummaryHeader << '\n'
     << csv_field(info.dataset) << ',' << csv_field(info.backbone) << ',' << csv_field(info.attack) << ','
     << format_number(info.eps_levels) << ','
     << format_optional(m.clean_accuracy) << ',' << format_optional(m.robust_accuracy) << ','
     << format_optional(m.detection_accuracy) << ',' << record_count << ',' << m.failures << '\n';
  return os.str();
}

inline std::string per_class_csv(const MetricsSummary& m) {
  std::ostringstream os;
  os << "label,clean_total,clean_correct,attacked_total,attacked_correct\n";
  for (const auto& c : m.per_class)
    os << c.label << ',' << c.clean_total << ',' << c.clean_correct << ',' << c.attacked_total << ','
       << c.attacked_correct << '\n';
  return os.str();
}

struct ReportFiles {
  std::filesystem::path records;
  std::filesystem::path summary;
  std::filesystem::path per_class;
  std::filesystem::path similarities;
  std::filesystem::path similarity_histogram;
  std::filesystem::path timings;
};

/// Writes the persisted artifacts of one run into `out_dir`. Everything
/// except timings.csv is a deterministic function of the records.
inline ReportFiles emit_report(const MetricsSummary& summary, const std::vector<EvaluationRecord>& records,
                               const std::filesystem::path& out_dir, const RunInfo& info) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  ReportFiles files{out_dir / "records.jsonl",  out_dir / "summary.csv",          out_dir / "per_class.csv",
                    out_dir / "similarity.csv", out_dir / "similarity_hist.svg", out_dir / "timings.csv"};
  write_records_jsonl(files.records, records);
  write_text(files.summary, summary_csv(info, summary, records.size()));
  write_text(files.per_class, per_class_csv(summary));

  std::ostringstream sims;
  std::ostringstream times;
  sims << "sample_id,attack,similarity,verdict\n";
  times << "sample_id,attack,wall_time_ms\n";
  plot::Series clean{"clean", {}};
  plot::Series attacked{"attacked", {}};
  for (const auto& r : records) {
    if (r.failed()) continue;
    sims << csv_field(r.sample_id) << ',' << r.attack << ',' << format_number(r.similarity) << ','
         << to_string(r.verdict) << '\n';
    times << csv_field(r.sample_id) << ',' << r.attack << ',' << format_number(r.wall_time_ms) << '\n';
    (r.attacked() ? attacked : clean).y.push_back(r.similarity);
  }
  write_text(files.similarities, sims.str());
  write_text(files.timings, times.str());
  const std::vector<plot::Series> hist{clean, attacked};
  write_text(files.similarity_histogram,
             plot::histogram_svg("Similarity shift: clean vs attacked", "cos(F(x), F(pad(x)))", hist, 40, -1.0, 1.0));
  return files;
}

inline Table pad_sweep_table(const std::vector<PadSweepRow>& rows) {
  Table t{{"pad_size", "clean_similarity", "adversarial_similarity", "detection_accuracy", "robust_accuracy"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({static_cast<double>(r.pad_size), r.clean_similarity, r.adversarial_similarity,
                      r.detection_accuracy, r.robust_accuracy.value_or(std::nan(""))});
  return t;
}

inline Table threshold_table(const CalibrationResult& c) {
  Table t{{"threshold", "accuracy"}, {}};
  for (const auto& p : c.curve) t.rows.push_back({p.threshold, p.accuracy});
  return t;
}

/// Line chart of every column against the first one.
inline std::string table_chart_svg(const Table& t, const std::string& title) {
  detail::require(t.header.size() >= 2, "table needs at least two columns to plot");
  std::vector<double> x;
  for (const auto& row : t.rows) x.push_back(row[0]);
  std::vector<plot::Series> series;
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    plot::Series s{t.header[c], {}};
    for (const auto& row : t.rows) s.y.push_back(row[c]);
    series.push_back(std::move(s));
  }
  return plot::line_chart_svg(title, t.header[0], "value", x, series);
}

}  // namespace ttp::harness
