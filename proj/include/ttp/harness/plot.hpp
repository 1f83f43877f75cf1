#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ttp/errors.hpp"

// Minimal SVG charts for sweep curves and similarity histograms. Output is a
// pure function of the inputs, so re-running a seeded job reproduces it.

namespace ttp::harness::plot {

struct Series {
  std::string name;
  std::vector<double> y;
};

namespace detail {

inline constexpr int kWidth = 640;
inline constexpr int kHeight = 420;
inline constexpr int kLeft = 70;
inline constexpr int kRight = 160;
inline constexpr int kTop = 40;
inline constexpr int kBottom = 50;
inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

inline void axes(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& xlabel,
                 const std::string& ylabel) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << escape(title) << "</text>\n";
  const double xa = f.px(f.x0), xb = f.px(f.x1), ya = f.py(f.y0), yb = f.py(f.y1);
  os << "<line x1=\"" << xa << "\" y1=\"" << ya << "\" x2=\"" << xb << "\" y2=\"" << ya << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << xa << "\" y1=\"" << ya << "\" x2=\"" << xa << "\" y2=\"" << yb << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << f.px(xv) << "\" y=\"" << ya + 16 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"11\">" << fmt(xv) << "</text>\n"
       << "<text x=\"" << xa - 6 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
       << "font-size=\"11\">" << fmt(yv) << "</text>\n";
  }
  os << "<text x=\"" << (xa + xb) / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(xlabel) << "</text>\n"
     << "<text x=\"16\" y=\"" << (ya + yb) / 2 << "\" transform=\"rotate(-90 16 " << (ya + yb) / 2
     << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(ylabel) << "</text>\n";
}

inline void legend(std::ostringstream& os, std::span<const std::string> names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    os << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"12\" fill=\""
       << kPalette[i % std::size(kPalette)] << "\"/>\n"
       << "<text x=\"" << kWidth - kRight + 30 << "\" y=\"" << y + 1
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(names[i]) << "</text>\n";
  }
}

}  // namespace detail

inline std::string line_chart_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                                  std::span<const double> x, std::span<const Series> series) {
  ttp::detail::require(!x.empty() && !series.empty(), "line chart needs data");
  double x0 = *std::min_element(x.begin(), x.end());
  double x1 = *std::max_element(x.begin(), x.end());
  double y0 = std::numeric_limits<double>::infinity();
  double y1 = -y0;
  for (const auto& s : series) {
    ttp::detail::require(s.y.size() == x.size(), "series '" + s.name + "' length differs from x");
    for (double v : s.y)
      if (std::isfinite(v)) {
        y0 = std::min(y0, v);
        y1 = std::max(y1, v);
      }
  }
  if (!std::isfinite(y0)) y0 = y1 = 0.0;
  detail::widen(x0, x1);
  detail::widen(y0, y1);
  const detail::Frame f{x0, x1, y0, y1};

  std::ostringstream os;
  detail::axes(os, f, title, xlabel, ylabel);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    names.push_back(series[k].name);
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std::isfinite(series[k].y[i])) os << f.px(x[i]) << ',' << f.py(series[k].y[i]) << ' ';
    os << "\"/>\n";
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std::isfinite(series[k].y[i]))
        os << "<circle cx=\"" << f.px(x[i]) << "\" cy=\"" << f.py(series[k].y[i]) << "\" r=\"3\" fill=\"" << color
           << "\"/>\n";
  }
  detail::legend(os, names);
  os << "</svg>\n";
  return os.str();
}

/// Overlaid histograms over a shared [lo, hi] range.
inline std::string histogram_svg(const std::string& title, const std::string& xlabel, std::span<const Series> samples,
                                 int bins, double lo, double hi) {
  ttp::detail::require(bins >= 1 && hi > lo, "histogram needs bins >= 1 and hi > lo");
  std::vector<std::vector<double>> counts;
  double peak = 1.0;
  for (const auto& s : samples) {
    std::vector<double> c(bins, 0.0);
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
      c[std::clamp(b, 0, bins - 1)] += 1.0;
    }
    peak = std::max(peak, *std::max_element(c.begin(), c.end()));
    counts.push_back(std::move(c));
  }
  const detail::Frame f{lo, hi, 0.0, peak};
  std::ostringstream os;
  detail::axes(os, f, title, xlabel, "count");
  std::vector<std::string> names;
  const double bw = (hi - lo) / bins;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    names.push_back(samples[k].name);
    for (int b = 0; b < bins; ++b) {
      if (counts[k][b] == 0.0) continue;
      const double xa = f.px(lo + b * bw);
      const double xb = f.px(lo + (b + 1) * bw);
      const double top = f.py(counts[k][b]);
      os << "<rect x=\"" << xa << "\" y=\"" << top << "\" width=\"" << xb - xa << "\" height=\"" << f.py(0.0) - top
         << "\" fill=\"" << detail::kPalette[k % std::size(detail::kPalette)] << "\" fill-opacity=\"0.5\"/>\n";
    }
  }
  detail::legend(os, names);
  os << "</svg>\n";
  return os.str();
}

}  // namespace ttp::harness::plot
