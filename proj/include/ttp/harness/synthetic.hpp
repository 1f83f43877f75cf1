#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ttp/attacks.hpp"
#include "ttp/harness/dataset.hpp"
#include "ttp/image.hpp"
#include "ttp/random.hpp"
#include "ttp/zero_shot.hpp"

namespace ttp::harness {

struct SyntheticConfig {
  int classes = 5;
  int per_class = 2;
  int image_size = 224;
  int shaping_steps = 40;
  double shaping_step = 2.0;  // intensity levels per step
  double target_confidence = 0.9;
  std::uint64_t seed = 0;
};

inline std::vector<std::string> synthetic_class_names(int classes) {
  std::vector<std::string> names;
  for (int c = 0; c < classes; ++c) names.push_back("class_" + std::to_string(c));
  return names;
}

/// Class-conditional images for an encoder that has no natural image
/// semantics (the toy backend). Each sample starts as a smooth random field
/// and is pushed towards its class by signed descent on cross-entropy, so
/// the zero-shot classifier labels it correctly with a comfortable margin.
inline std::vector<LabeledImage> make_synthetic_samples(const ImageEncoder& encoder, const ClassPrototypeSet& protos,
                                                        const SyntheticConfig& cfg) {
  detail::require(cfg.classes >= 1 && static_cast<std::size_t>(cfg.classes) <= protos.num_classes(),
                  "synthetic: class count exceeds prototype set");
  detail::require(cfg.per_class >= 1 && cfg.image_size >= 4, "synthetic: bad sample shape");
  const ZeroShotModel model(encoder, protos);
  std::vector<LabeledImage> out;
  for (int c = 0; c < cfg.classes; ++c) {
    for (int k = 0; k < cfg.per_class; ++k) {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(c) * 100003 + k));
      std::uniform_real_distribution<double> level(60.0, 195.0);
      Image coarse(4, 4);
      for (double& v : coarse.values()) v = level(rng);
      Image img = resize(coarse, cfg.image_size, cfg.image_size, ResizeFilter::bilinear);
      for (int step = 0; step < cfg.shaping_steps; ++step) {
        if (softmax(model.logits(img))[c] >= cfg.target_confidence) break;
        const Image g = cross_entropy_gradient(model, img, static_cast<std::size_t>(c));
        auto v = img.values();
        auto gv = g.values();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= cfg.shaping_step * detail::sign(gv[i]);
        clamp_pixels(img);
      }
      for (double& v : img.values()) v = std::round(v);
      out.push_back({"synthetic/" + protos.class_names[c] + "/" + std::to_string(k), static_cast<std::size_t>(c),
                     std::move(img)});
    }
  }
  return out;
}

}  // namespace ttp::harness
