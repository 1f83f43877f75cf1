#include <gtest/gtest.h>

#include <set>

#include "support/stubs.hpp"

using namespace ttp;
using ttp::testing::random_image;
using ttp::testing::random_vector;

namespace {

// Independent count: enumerate the canvas and skip the interior.
std::size_t brute_force_parameter_count(int h, int w, int pad) {
  std::size_t n = 0;
  for (int y = 0; y < h + 2 * pad; ++y)
    for (int x = 0; x < w + 2 * pad; ++x)
      if (!(y >= pad && y < pad + h && x >= pad && x < pad + w)) n += 3;
  return n;
}

bool center_preserved(const Image& padded, const Image& src, int pad) {
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < 3; ++c)
        if (padded.at(y + pad, x + pad, c) != src.at(y, x, c)) return false;
  return true;
}

}  // namespace

TEST(FixedPadding, EnlargesCanvasAndKeepsCenter) {
  const Image img = random_image(224, 224, 1);
  const Image out = apply_fixed_padding(img, {}, 32);
  EXPECT_EQ(out.height(), 288);
  EXPECT_EQ(out.width(), 288);
  EXPECT_TRUE(center_preserved(out, img, 32));
}

TEST(FixedPadding, ZeroAndWhiteBorders) {
  const Image img = random_image(6, 5, 2, 1.0, 254.0);
  const Image zero = apply_fixed_padding(img, {PaddingKind::zero}, 2);
  const Image white = apply_fixed_padding(img, {PaddingKind::white}, 2);
  for_each_border_pixel(6, 5, 2, [&](int y, int x, std::size_t) {
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(zero.at(y, x, c), 0.0);
      EXPECT_EQ(white.at(y, x, c), 255.0);
    }
  });
  EXPECT_TRUE(center_preserved(zero, img, 2));
  EXPECT_TRUE(center_preserved(white, img, 2));
}

TEST(FixedPadding, RandomBorderIsSeededIntegerNoise) {
  const Image img = random_image(8, 8, 3);
  const Image a = apply_fixed_padding(img, {PaddingKind::random, 42}, 3);
  const Image b = apply_fixed_padding(img, {PaddingKind::random, 42}, 3);
  const Image c = apply_fixed_padding(img, {PaddingKind::random, 43}, 3);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::set<double> levels;
  for_each_border_pixel(8, 8, 3, [&](int y, int x, std::size_t) {
    for (int ch = 0; ch < 3; ++ch) {
      const double v = a.at(y, x, ch);
      EXPECT_EQ(v, std::floor(v));
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 255.0);
      levels.insert(v);
    }
  });
  EXPECT_GT(levels.size(), 50u);
}

TEST(FixedPadding, ZeroWidthIsIdentity) {
  const Image img = random_image(5, 7, 4);
  EXPECT_EQ(apply_fixed_padding(img, {PaddingKind::white}, 0), img);
  EXPECT_THROW(apply_fixed_padding(img, {}, -1), InvalidArgument);
}

TEST(TrainablePadding, ParameterCountFor224And32) {
  EXPECT_EQ(TrainablePadding::parameter_count(224, 224, 32), brute_force_parameter_count(224, 224, 32));
  EXPECT_EQ(TrainablePadding::parameter_count(224, 224, 32), 98304u);
  EXPECT_EQ(init_trainable_padding(32, 224, 224, 0).theta().size(), 98304u);
}

TEST(TrainablePadding, ParameterCountExhaustiveSmallCases) {
  EXPECT_EQ(TrainablePadding::parameter_count(4, 4, 1), 60u);
  for (int h = 1; h <= 6; ++h)
    for (int w = 1; w <= 6; ++w)
      for (int p = 1; p <= 4; ++p) {
        EXPECT_EQ(TrainablePadding::parameter_count(h, w, p), brute_force_parameter_count(h, w, p));
        std::size_t visited = 0;
        for_each_border_pixel(h, w, p, [&](int, int, std::size_t k) { EXPECT_EQ(k, visited++); });
        EXPECT_EQ(visited * 3, brute_force_parameter_count(h, w, p));
      }
}

TEST(TrainablePadding, InitIsSeededAndWithinRange) {
  const auto a = init_trainable_padding(4, 10, 12, 7);
  const auto b = init_trainable_padding(4, 10, 12, 7);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, init_trainable_padding(4, 10, 12, 8));
  for (double v : a.theta()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 10.0);
  }
  EXPECT_DOUBLE_EQ(a.scale(), 25.5);
  EXPECT_THROW(init_trainable_padding(0, 10, 12, 7), InvalidArgument);
}

TEST(TrainablePadding, ZeroThetaMatchesZeroPattern) {
  const Image img = random_image(9, 6, 5);
  const TrainablePadding pad(9, 6, 3, std::vector<double>(TrainablePadding::parameter_count(9, 6, 3), 0.0));
  EXPECT_EQ(pad.apply(img), apply_fixed_padding(img, {PaddingKind::zero}, 3));
}

TEST(TrainablePadding, ThetaTenSaturatesToWhite) {
  const Image img = random_image(9, 6, 5);
  const TrainablePadding pad(9, 6, 3, std::vector<double>(TrainablePadding::parameter_count(9, 6, 3), 10.0));
  EXPECT_EQ(pad.apply(img), apply_fixed_padding(img, {PaddingKind::white}, 3));
}

TEST(TrainablePadding, OutputStaysInRangeAndCenterIsUntouchedProperty) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Image img = random_image(7, 8, s);
    auto theta = random_vector(TrainablePadding::parameter_count(7, 8, 2), s + 50);
    for (double& t : theta) t = 5.0 + 12.0 * t;  // spills well outside [0,10]
    const TrainablePadding pad(7, 8, 2, theta);
    const Image out = pad.apply(img);
    EXPECT_TRUE(center_preserved(out, img, 2));
    EXPECT_NO_THROW(validate_pixels(out));
  }
}

TEST(TrainablePadding, RejectsSizeMismatch) {
  const auto pad = init_trainable_padding(2, 8, 8, 0);
  EXPECT_THROW(pad.apply(Image(8, 9)), InvalidArgument);
}

TEST(TrainablePadding, PixelDerivativeIsScaleInsideClamp) {
  const std::size_t n = TrainablePadding::parameter_count(3, 3, 1);
  std::vector<double> theta(n, 4.0);
  const Image img(3, 3, 100.0);
  const double h = 1e-4;
  for (std::size_t i : {std::size_t{0}, std::size_t{7}, n - 1}) {
    auto plus = theta, minus = theta;
    plus[i] += h;
    minus[i] -= h;
    const Image a = TrainablePadding(3, 3, 1, plus).apply(img);
    const Image b = TrainablePadding(3, 3, 1, minus).apply(img);
    double numeric = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) numeric += (a.values()[k] - b.values()[k]) / (2 * h);
    EXPECT_NEAR(numeric, 25.5, 1e-6);
  }
}

TEST(TrainablePadding, ThetaGradientMatchesFiniteDifferences) {
  const int h = 6, w = 5, p = 2;
  const Image img = random_image(h, w, 9);
  auto theta = random_vector(TrainablePadding::parameter_count(h, w, p), 10);
  for (double& t : theta) t = 5.0 + 1.5 * std::tanh(t);  // inside (0,10), clamp inactive
  const Image weights = random_image(h + 2 * p, w + 2 * p, 11, -1.0, 1.0);
  auto loss = [&](const std::vector<double>& th) {
    return ttp::testing::dot(TrainablePadding(h, w, p, th).apply(img).values(), weights.values());
  };
  const auto grad = TrainablePadding(h, w, p, theta).theta_gradient(weights);
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const auto dir = random_vector(theta.size(), 20 + trial);
    const double numeric = ttp::testing::directional_fd(loss, theta, dir, 1e-4);
    EXPECT_LT(ttp::testing::relative_error(ttp::testing::dot(grad, dir), numeric), 1e-4);
  }
}

TEST(TrainablePadding, ClampedEntriesPassNoGradient) {
  std::vector<double> theta(TrainablePadding::parameter_count(2, 2, 1), 5.0);
  theta[0] = -1.0;
  theta[1] = 11.0;
  const TrainablePadding pad(2, 2, 1, theta);
  const auto g = pad.theta_gradient(Image(4, 4, 1.0));
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(g[2], 25.5);
}

TEST(SgdStep, ArithmeticAndFixedPoint) {
  const std::size_t n = TrainablePadding::parameter_count(2, 2, 1);
  const TrainablePadding pad(2, 2, 1, std::vector<double>(n, 5.0));
  const auto next = sgd_step(pad, std::vector<double>(n, 0.2));  // default lr 5
  for (double v : next.theta()) EXPECT_DOUBLE_EQ(v, 4.0);
  EXPECT_EQ(sgd_step(pad, std::vector<double>(n, 0.0), 5.0), pad);
  EXPECT_THROW(sgd_step(pad, std::vector<double>(n + 1, 0.0), 5.0), InvalidArgument);
  // The source value is untouched.
  for (double v : pad.theta()) EXPECT_EQ(v, 5.0);
}
