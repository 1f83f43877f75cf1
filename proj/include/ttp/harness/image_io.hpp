#pragma once

// File I/O for images through OpenCV's codecs. Link opencv_core and
// opencv_imgcodecs when including this header.

#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "ttp/errors.hpp"
#include "ttp/harness/dataset.hpp"
#include "ttp/image.hpp"

namespace ttp::harness {

/// Reads an 8-bit image as RGB in [0,255]. Grayscale inputs are replicated.
inline Image load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot decode image " + path.string());
  Image out(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x)
      for (int c = 0; c < Image::kChannels; ++c) out.at(y, x, c) = row[x][2 - c];
  }
  return out;
}

/// Writes with values rounded to the nearest 8-bit level. Use a lossless
/// format (.png, .ppm) when the exact levels matter.
inline void save_image(const std::filesystem::path& path, const Image& image) {
  cv::Mat bgr(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < Image::kChannels; ++c) row[x][2 - c] = cv::saturate_cast<uchar>(image.at(y, x, c));
  }
  if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write image " + path.string());
}

/// Rounds to 8-bit levels, matching what a save/load round trip yields.
inline Image quantize(const Image& image) {
  Image out = image;
  for (double& v : out.values()) v = static_cast<double>(cv::saturate_cast<uchar>(v));
  return out;
}

inline std::vector<LabeledImage> load_samples(const DatasetManifest& manifest) {
  std::vector<LabeledImage> out;
  out.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) {
    auto rel = std::filesystem::relative(s.path, manifest.root).generic_string();
    out.push_back({std::move(rel), s.label, load_image(s.path)});
  }
  return out;
}

}  // namespace ttp::harness
