#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ttp/errors.hpp"
#include "ttp/image.hpp"
#include "ttp/random.hpp"
#include "ttp/zero_shot.hpp"

// White-box attacks on any LogitModel. Budgets (epsilon, step sizes, the CW
// perturbation penalty) are in pixel-fraction units, i.e. 4/255 means four
// intensity levels; images themselves stay in [0,255].

namespace ttp {

enum class AttackKind { fgsm, pgd, cw, deepfool };

inline std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::pgd: return "pgd";
    case AttackKind::cw: return "cw";
    case AttackKind::deepfool: return "deepfool";
  }
  return "pgd";
}

inline AttackKind parse_attack_kind(std::string_view text) {
  if (text == "fgsm") return AttackKind::fgsm;
  if (text == "pgd") return AttackKind::pgd;
  if (text == "cw") return AttackKind::cw;
  if (text == "deepfool" || text == "df") return AttackKind::deepfool;
  throw InvalidArgument("unknown attack kind '" + std::string(text) + "' (expected fgsm|pgd|cw|deepfool)");
}

struct AttackConfig {
  AttackKind kind = AttackKind::pgd;
  double epsilon = 4.0 / 255.0;
  int steps = 100;
  std::optional<double> step_size;  // unset: epsilon/4 for pgd, kDefaultCwStep for cw
  double overshoot = 0.02;
  double margin_const = 1.0;
  bool random_start = true;
  std::uint64_t seed = 0;

  static constexpr double kDefaultCwStep = 0.1;

  double effective_step_size() const {
    if (step_size) return *step_size;
    return kind == AttackKind::cw ? kDefaultCwStep : epsilon / 4.0;
  }

  void validate() const {
    detail::require(std::isfinite(epsilon) && epsilon >= 0.0, "attack epsilon must be >= 0");
    detail::require(steps >= 1, "attack steps must be >= 1");
    detail::require(!step_size || (*step_size > 0.0 && std::isfinite(*step_size)), "attack step size must be > 0");
    detail::require(std::isfinite(overshoot) && overshoot >= 0.0, "deepfool overshoot must be >= 0");
    detail::require(std::isfinite(margin_const) && margin_const >= 0.0, "cw margin constant must be >= 0");
  }

  /// Canonical text form; stable across runs and used for manifest hashes.
  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "kind=" << to_string(kind) << ";eps=" << epsilon << ";steps=" << steps
       << ";step=" << effective_step_size() << ";overshoot=" << overshoot << ";c=" << margin_const
       << ";random_start=" << random_start << ";seed=" << seed;
    return os.str();
  }

  std::uint64_t hash() const { return fnv1a(canonical()); }
};

namespace detail {

inline void check_label(std::size_t label, std::size_t num_classes) {
  require(label < num_classes,
          "true label " + std::to_string(label) + " out of range for " + std::to_string(num_classes) + " classes");
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Gradient of the cross-entropy loss -log softmax(logits)[label] w.r.t. pixels.
template <LogitModel Model>
Image cross_entropy_gradient(const Model& model, const Image& x, std::size_t label, double* loss = nullptr) {
  detail::check_label(label, model.num_classes());
  const auto logits = model.logits(x);
  auto cot = softmax(logits).probs;
  if (loss) *loss = -std::log(std::max(cot[label], std::numeric_limits<double>::min()));
  cot[label] -= 1.0;
  return model.logits_vjp(x, cot);
}

template <LogitModel Model>
double cross_entropy(const Model& model, const Image& x, std::size_t label) {
  detail::check_label(label, model.num_classes());
  const auto p = softmax(model.logits(x));
  return -std::log(std::max(p[label], std::numeric_limits<double>::min()));
}

/// x_adv = clamp(x + eps * sign(grad_x CE)).
template <LogitModel Model>
Image fgsm(const Model& model, const Image& x, std::size_t label, double eps) {
  detail::require(std::isfinite(eps) && eps >= 0.0, "fgsm: eps must be >= 0");
  detail::check_label(label, model.num_classes());
  validate_pixels(x);
  if (eps == 0.0) return x;
  const Image grad = cross_entropy_gradient(model, x, label);
  Image out = x;
  auto v = out.values();
  auto g = grad.values();
  const double delta = eps * kPixelMax;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i] + delta * detail::sign(g[i]), 0.0, kPixelMax);
  return out;
}

/// Signed-gradient ascent on cross-entropy, projected onto the eps L-inf ball
/// around `x` and the pixel range after every step.
template <LogitModel Model>
Image pgd(const Model& model, const Image& x, std::size_t label, const AttackConfig& cfg) {
  cfg.validate();
  detail::check_label(label, model.num_classes());
  validate_pixels(x);
  const double radius = cfg.epsilon * kPixelMax;
  const double step = cfg.effective_step_size() * kPixelMax;
  auto x0 = x.values();

  Image cur = x;
  if (cfg.random_start && radius > 0.0) {
    Rng rng(derive_seed(cfg.seed, 0x96d));
    std::uniform_real_distribution<double> u(-radius, radius);
    for (auto& v : cur.values()) v = std::clamp(v + u(rng), 0.0, kPixelMax);
  }
  for (int it = 0; it < cfg.steps; ++it) {
    const Image grad = cross_entropy_gradient(model, cur, label);
    auto v = cur.values();
    auto g = grad.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double moved = v[i] + step * detail::sign(g[i]);
      v[i] = std::clamp(std::clamp(moved, x0[i] - radius, x0[i] + radius), 0.0, kPixelMax);
    }
  }
  return cur;
}

/// Value of max(z_y - max_{c != y} z_c, 0) + c * ||delta||^2, with delta in
/// pixel-fraction units. Also reports the runner-up class.
template <LogitModel Model>
double cw_objective(const Model& model, const Image& x0, const Image& x, std::size_t label, double margin_const,
                    std::size_t* runner_up = nullptr, double* margin = nullptr) {
  const auto z = model.logits(x);
  std::size_t best_other = label == 0 ? 1 : 0;
  for (std::size_t c = 0; c < z.size(); ++c)
    if (c != label && z[c] > z[best_other]) best_other = c;
  const double m = z[label] - z[best_other];
  double d2 = 0.0;
  auto a = x.values();
  auto b = x0.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]) / kPixelMax;
    d2 += d * d;
  }
  if (runner_up) *runner_up = best_other;
  if (margin) *margin = m;
  return std::max(m, 0.0) + margin_const * d2;
}

/// Gradient of `cw_objective` with respect to delta (pixel-fraction units).
template <LogitModel Model>
std::vector<double> cw_objective_gradient(const Model& model, const Image& x0, const Image& x, std::size_t label,
                                          double margin_const) {
  std::size_t other = 0;
  double margin = 0.0;
  cw_objective(model, x0, x, label, margin_const, &other, &margin);
  std::vector<double> grad(x.size(), 0.0);
  if (margin > 0.0) {
    std::vector<double> cot(model.num_classes(), 0.0);
    cot[label] = 1.0;
    cot[other] = -1.0;
    const Image g = model.logits_vjp(x, cot);
    auto gv = g.values();
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = gv[i] * kPixelMax;
  }
  auto a = x.values();
  auto b = x0.values();
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += 2.0 * margin_const * (a[i] - b[i]) / kPixelMax;
  return grad;
}

/// Carlini-Wagner style margin attack with a fixed trade-off constant.
/// Takes L2-normalized gradient steps of length `step_size` and returns the
/// lowest-objective iterate seen (the input itself included).
template <LogitModel Model>
Image cw(const Model& model, const Image& x, std::size_t label, const AttackConfig& cfg) {
  cfg.validate();
  detail::check_label(label, model.num_classes());
  validate_pixels(x);
  if (model.num_classes() < 2) return x;
  const double step = cfg.effective_step_size();

  Image best = x;
  double best_obj = cw_objective(model, x, x, label, cfg.margin_const);
  Image cur = x;
  for (int it = 0; it < cfg.steps && best_obj > 0.0; ++it) {
    const auto grad = cw_objective_gradient(model, x, cur, label, cfg.margin_const);
    const double gnorm = detail::norm2(grad);
    if (!(gnorm > 0.0)) break;
    auto v = cur.values();
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = std::clamp(v[i] - kPixelMax * step * grad[i] / gnorm, 0.0, kPixelMax);
    const double obj = cw_objective(model, x, cur, label, cfg.margin_const);
    if (obj < best_obj) {
      best_obj = obj;
      best = cur;
    }
  }
  return best;
}

/// Multiclass DeepFool: repeatedly steps to the nearest linearized decision
/// boundary until the label flips or `cfg.steps` iterations pass. The
/// accumulated perturbation is scaled by (1 + overshoot).
template <LogitModel Model>
Image deepfool(const Model& model, const Image& x, std::size_t label, const AttackConfig& cfg, int* iterations = nullptr) {
  cfg.validate();
  detail::check_label(label, model.num_classes());
  validate_pixels(x);
  const std::size_t classes = model.num_classes();
  std::vector<double> r_total(x.size(), 0.0);
  Image cur = x;
  int it = 0;
  for (; it < cfg.steps; ++it) {
    const auto z = model.logits(cur);
    if (argmax(z) != label) break;
    double best_dist = std::numeric_limits<double>::infinity();
    std::vector<double> best_w;
    double best_f = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (c == label) continue;
      std::vector<double> cot(classes, 0.0);
      cot[c] = 1.0;
      cot[label] = -1.0;
      const Image w = model.logits_vjp(cur, cot);
      const double wn = detail::norm2(w.values());
      if (!(wn > 0.0)) continue;
      const double f = z[c] - z[label];
      const double dist = std::abs(f) / wn;
      if (dist < best_dist) {
        best_dist = dist;
        best_w.assign(w.values().begin(), w.values().end());
        best_f = f;
      }
    }
    if (best_w.empty()) break;
    const double wn2 = detail::dot(best_w, best_w);
    for (std::size_t i = 0; i < r_total.size(); ++i) r_total[i] += std::abs(best_f) / wn2 * best_w[i];
    auto v = cur.values();
    auto v0 = x.values();
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = std::clamp(v0[i] + (1.0 + cfg.overshoot) * r_total[i], 0.0, kPixelMax);
  }
  if (iterations) *iterations = it;
  return cur;
}

template <LogitModel Model>
Image run_attack(const Model& model, const Image& x, std::size_t label, const AttackConfig& cfg) {
  switch (cfg.kind) {
    case AttackKind::fgsm: return fgsm(model, x, label, cfg.epsilon);
    case AttackKind::pgd: return pgd(model, x, label, cfg);
    case AttackKind::cw: return cw(model, x, label, cfg);
    case AttackKind::deepfool: return deepfool(model, x, label, cfg);
  }
  return x;
}

/// Attacks the zero-shot classifier assembled from `encoder` and `protos`.
inline Image run_attack(const ImageEncoder& encoder, const ClassPrototypeSet& protos, const ClassifierConfig& cls,
                        const Image& x, std::size_t label, const AttackConfig& cfg) {
  return run_attack(ZeroShotModel(encoder, protos, cls), x, label, cfg);
}

}  // namespace ttp
