#include <gtest/gtest.h>

#include <numbers>

#include "support/stubs.hpp"

using namespace ttp;
using ttp::testing::random_image;
using ttp::testing::random_vector;

namespace {

struct Fixture {
  EncoderHandle enc = make_toy_encoder(2, 16, 16);
  ClassPrototypeSet protos = encode_text_prototypes(*enc, {"cat", "dog", "car", "tree", "boat"});
  ClassifierConfig cls{0.1};
  Image image = random_image(16, 16, 3);
};

ProbabilityVector probs(std::vector<double> p) { return ProbabilityVector{std::move(p)}; }

}  // namespace

TEST(Views, DefaultBatchHas64ViewsAndKeepsTheInputFirst) {
  const Image img = random_image(24, 24, 1);
  AdaptationConfig cfg;
  EXPECT_EQ(cfg.selected_count(), 7u);
  const auto views = generate_views(img, cfg);
  ASSERT_EQ(views.size(), 64u);
  EXPECT_EQ(views[0], img);
  for (const auto& v : views) {
    EXPECT_TRUE(v.same_shape(img));
    for (double p : v.values()) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 255.0);
    }
  }
  EXPECT_NE(views[1], img);
}

TEST(Views, SeededAndReproducible) {
  const Image img = random_image(20, 20, 2);
  AdaptationConfig cfg;
  cfg.num_views = 8;
  cfg.seed = 5;
  const auto a = generate_views(img, cfg);
  EXPECT_EQ(a, generate_views(img, cfg));
  cfg.seed = 6;
  EXPECT_NE(a, generate_views(img, cfg));
}

TEST(Entropy, KnownValues) {
  EXPECT_NEAR(entropy(probs(std::vector<double>(10, 0.1))), std::log(10.0), 1e-12);
  EXPECT_EQ(entropy(probs({0.0, 1.0, 0.0})), 0.0);
  EXPECT_NEAR(entropy(probs({0.5, 0.5})), std::numbers::ln2, 1e-12);
}

TEST(Entropy, BoundedByLogClassCountProperty) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto z = random_vector(7, s);
    const double h = entropy(softmax(z));
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(7.0) + 1e-12);
  }
}

TEST(Entropy, LogitGradientMatchesFiniteDifferences) {
  const auto z = random_vector(6, 4);
  const auto g = entropy_logit_gradient(softmax(z));
  for (std::size_t k = 0; k < z.size(); ++k) {
    auto zp = z, zm = z;
    zp[k] += 1e-6;
    zm[k] -= 1e-6;
    const double fd = (entropy(softmax(zp)) - entropy(softmax(zm))) / 2e-6;
    EXPECT_NEAR(g[k], fd, 1e-8);
  }
}

TEST(SelectConfident, Examples) {
  const std::vector<double> h{0.1, 0.9, 0.2, 0.8};
  EXPECT_EQ(select_confident(h, 0.5), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(select_confident(h, 1.0).size(), 4u);
  const std::vector<double> tied(5, 0.3);
  EXPECT_EQ(select_confident(tied, 0.1), (std::vector<std::size_t>{0}));
  EXPECT_EQ(select_confident(std::vector<double>{0.5, 0.5}, 0.5), (std::vector<std::size_t>{0}));
  EXPECT_THROW(select_confident(h, 0.0), InvalidArgument);
  EXPECT_THROW(select_confident(std::vector<double>{}, 0.5), InvalidArgument);
}

TEST(SelectConfident, MatchesPairSortOracle) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto h = random_vector(30, 50 + s);
    for (std::size_t i = 0; i + 1 < h.size(); i += 5) h[i + 1] = h[i];  // force ties
    std::vector<std::pair<double, std::size_t>> pairs;
    for (std::size_t i = 0; i < h.size(); ++i) pairs.emplace_back(h[i], i);
    std::sort(pairs.begin(), pairs.end());
    std::vector<std::size_t> expected;
    for (std::size_t k = 0; k < 9; ++k) expected.push_back(pairs[k].second);  // ceil(0.3 * 30)
    EXPECT_EQ(select_confident(h, 0.3), expected);
  }
}

TEST(SelectConfident, SelectedNeverWorseThanUnselectedProperty) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto h = random_vector(64, s);
    const auto sel = select_confident(h, 0.1);
    ASSERT_EQ(sel.size(), 7u);
    double worst = -1e300;
    for (auto i : sel) worst = std::max(worst, h[i]);
    for (std::size_t i = 0; i < h.size(); ++i)
      if (std::find(sel.begin(), sel.end(), i) == sel.end()) {
        EXPECT_GE(h[i], worst);
      }
  }
}

TEST(PaddedEntropyLoss, ThetaGradientMatchesFiniteDifferences) {
  Fixture f;
  const auto pad = init_trainable_padding(4, 16, 16, 7);
  const std::vector<Image> views{f.image, random_image(16, 16, 8)};
  const std::vector<std::size_t> sel{0, 1};
  const auto loss = padded_entropy_loss(*f.enc, f.protos, f.cls, views, sel, pad, true);
  EXPECT_EQ(loss.gradient_evaluations, 2u);

  auto objective = [&](const std::vector<double>& theta) {
    const TrainablePadding p(16, 16, 4, theta);
    return padded_entropy_loss(*f.enc, f.protos, f.cls, views, sel, p, false).value;
  };
  const std::vector<double> theta(pad.theta().begin(), pad.theta().end());
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto dir = random_vector(theta.size(), 100 + s);
    const double fd = ttp::testing::directional_fd(objective, theta, dir, 1e-5);
    const double an = ttp::testing::dot(loss.theta_grad, dir);
    EXPECT_LT(ttp::testing::relative_error(fd, an), 1e-4) << fd << " vs " << an;
  }
}

TEST(AdaptPadding, ConstantEncoderLeavesThetaUnchanged) {
  auto enc = std::make_shared<ttp::testing::ConstantEncoder>(std::vector<double>{0.3, -0.2, 0.9, 0.1});
  const auto protos = encode_text_prototypes(*enc, {"a", "b", "c"});
  const Image img = random_image(8, 8, 1);
  const auto pad = init_trainable_padding(2, 8, 8, 3);
  AdaptationConfig cfg;
  cfg.num_views = 8;
  const auto result = adapt_padding(*enc, protos, {}, img, cfg, pad);
  EXPECT_EQ(result.padding, pad);
  EXPECT_EQ(result.updates, 1);
}

TEST(AdaptPadding, SmallStepReducesTheSelectedLoss) {
  Fixture f;
  const auto pad = init_trainable_padding(4, 16, 16, 11);
  AdaptationConfig cfg;
  cfg.num_views = 16;
  cfg.lr = 1e-3;
  cfg.seed = 3;
  const auto r = adapt_padding(*f.enc, f.protos, f.cls, f.image, cfg, pad);
  EXPECT_EQ(r.updates, 1);
  EXPECT_EQ(r.batch.selected.size(), 2u);
  const double after =
      padded_entropy_loss(*f.enc, f.protos, f.cls, r.batch.views, r.batch.selected, r.padding, false).value;
  EXPECT_LT(after, r.loss_before);
  EXPECT_NE(r.padding, pad);
}

TEST(AdaptPadding, RanksUnpaddedViewsBeforeAnyPaddedPass) {
  Fixture f;
  auto inst = std::make_shared<InstrumentedEncoder>(f.enc);
  const auto pad = init_trainable_padding(4, 16, 16, 1);
  AdaptationConfig cfg;
  cfg.num_views = 20;
  const auto r = adapt_padding(*inst, f.protos, f.cls, f.image, cfg, pad);
  const auto calls = inst->calls();
  ASSERT_EQ(calls.size(), 20u + 2u * r.batch.selected.size());
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(calls[i].kind, InstrumentedEncoder::CallKind::forward);
    EXPECT_EQ(calls[i].height, 16);
  }
  for (std::size_t i = 20; i < calls.size(); ++i) EXPECT_EQ(calls[i].height, 24);
  EXPECT_EQ(inst->gradient_calls(), r.batch.selected.size());
}

TEST(AdaptPadding, RejectsMismatchedPadding) {
  Fixture f;
  const auto pad = init_trainable_padding(4, 8, 8, 1);
  EXPECT_THROW(adapt_padding(*f.enc, f.protos, f.cls, f.image, AdaptationConfig{}, pad), InvalidArgument);
}
