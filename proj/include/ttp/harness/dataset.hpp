#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "ttp/errors.hpp"
#include "ttp/image.hpp"
#include "ttp/zero_shot.hpp"

namespace ttp::harness {

struct SampleEntry {
  std::filesystem::path path;
  std::size_t label = 0;
};

/// Directory-per-class dataset: <root>/<class>/<image>. An optional
/// `classes.txt` (one name per line) fixes the class order; otherwise classes
/// are sorted lexicographically. Samples are sorted by path within a class.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<std::string> class_names;
  std::string prompt_template{kDefaultTemplate};
  std::string split = "test";
  std::vector<SampleEntry> samples;

  std::size_t sample_count() const noexcept { return samples.size(); }
};

inline bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  static const std::set<std::string> kExtensions{".png", ".jpg", ".jpeg", ".ppm", ".pgm", ".bmp", ".tif", ".tiff"};
  return kExtensions.count(ext) != 0;
}

inline DatasetManifest load_dataset(const std::filesystem::path& root, std::string_view prompt_template = kDefaultTemplate,
                                    std::string split = "test") {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IngestionError("dataset root does not exist or is not a directory: " + root.string());

  DatasetManifest m;
  m.root = root;
  m.prompt_template = prompt_template;
  m.split = std::move(split);

  const fs::path order_file = root / "classes.txt";
  if (fs::exists(order_file)) {
    std::ifstream in(order_file);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
      if (!line.empty()) m.class_names.push_back(line);
    }
    for (const auto& name : m.class_names)
      if (!fs::is_directory(root / name))
        throw IngestionError("class listed in classes.txt has no directory: " + (root / name).string());
  } else {
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.is_directory()) m.class_names.push_back(entry.path().filename().string());
    std::sort(m.class_names.begin(), m.class_names.end());
  }
  if (m.class_names.empty()) throw IngestionError("dataset has no class directories: " + root.string());

  for (std::size_t label = 0; label < m.class_names.size(); ++label) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / m.class_names[label]))
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (auto& f : files) m.samples.push_back({std::move(f), label});
  }
  if (m.samples.empty()) throw IngestionError("dataset contains no images: " + root.string());
  return m;
}

/// An in-memory evaluation sample.
struct LabeledImage {
  std::string id;
  std::size_t label = 0;
  Image image;
};

}  // namespace ttp::harness
