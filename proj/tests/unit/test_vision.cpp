// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "gradcheck.hpp"
#include "slidekit/error.hpp"
#include "slidekit/vision/tower.hpp"

namespace slidekit::vision {
namespace {

using testing::kGradTolerance;
using testing::numeric_gradient;
using testing::relative_error;
using testing::weighted_sum;

AggregatorDims small_dims() { return {6, 5, 4}; }

TowerDims small_tower() { return {{6, 5, 4}, 4, 7, 3}; }

TEST(Aggregator, SinglePatchGetsAllTheWeight) {
  Rng rng(1);
  const auto net = make_gated_attention(small_dims(), rng);
  const Matrix x = Matrix::normal(1, 6, 1.0, rng);
  const auto s = cbpa_forward(net, x);
  ASSERT_EQ(s.attention_weights.size(), 1u);
  EXPECT_EQ(s.attention_weights[0], 1.0);
  EXPECT_EQ(s.vector, forward(net.fc, x));
}

TEST(Aggregator, IdenticalPatchesGiveUniformWeights) {
  Rng rng(2);
  const auto net = make_gated_attention(small_dims(), rng);
  const Matrix one = Matrix::normal(1, 6, 1.0, rng);
  const std::vector<Matrix> copies(5, one);
  const auto s = cbpa_forward(net, vstack(copies));
  for (double w : s.attention_weights) EXPECT_NEAR(w, 0.2, 1e-15);
  const auto single = cbpa_forward(net, one);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(s.vector(0, i), single.vector(0, i), 1e-12);
}

TEST(Aggregator, EmptyBagIsAnError) {
  Rng rng(3);
  const auto net = make_gated_attention(small_dims(), rng);
  EXPECT_THROW(cbpa_forward(net, Matrix(0, 6)), EmptyBagError);
  EXPECT_THROW(cbpa_forward(net, Matrix(2, 5)), DimensionError);
}

// Scalar re-derivation of the gated attention forward pass for 2 patches
// with 2-d features, written without any library helper.
TEST(Aggregator, MatchesHandTracedOracle) {
  GatedAttentionNet net;
  net.fc = {Matrix{{1, 0}, {1, -1}}, Matrix{{0, 1}}};
  net.attention_tanh = {Matrix{{1, 1}, {0, -1}}, Matrix{{0, 0}}};
  net.attention_sigmoid = {Matrix{{2, 0}, {-1, 1}}, Matrix{{1, 0}}};
  net.score = {Matrix{{1, -2}}, Matrix{{0}}};
  const Matrix x{{1, 2}, {-1, 0}};

  double h[2][2], score[2];
  for (int k = 0; k < 2; ++k) {
    h[k][0] = 1 * x(k, 0) + 0 * x(k, 1) + 0;
    h[k][1] = 1 * x(k, 0) - 1 * x(k, 1) + 1;
    const double a0 = std::tanh(h[k][0] + h[k][1]);
    const double a1 = std::tanh(-h[k][1]);
    const double g0 = 1 / (1 + std::exp(-(2 * h[k][0] + 1)));
    const double g1 = 1 / (1 + std::exp(-(-h[k][0] + h[k][1])));
    score[k] = 1 * a0 * g0 - 2 * a1 * g1;
  }
  const double e0 = std::exp(score[0]), e1 = std::exp(score[1]);
  const double w0 = e0 / (e0 + e1), w1 = e1 / (e0 + e1);

  const auto s = cbpa_forward(net, x);
  EXPECT_NEAR(s.attention_weights[0], w0, 1e-14);
  EXPECT_NEAR(s.attention_weights[1], w1, 1e-14);
  EXPECT_NEAR(s.vector(0, 0), w0 * h[0][0] + w1 * h[1][0], 1e-14);
  EXPECT_NEAR(s.vector(0, 1), w0 * h[0][1] + w1 * h[1][1], 1e-14);
}

TEST(Aggregator, PermutationInvarianceAndNormalization) {
  for (int draw = 0; draw < 25; ++draw) {
    Rng rng(50 + draw);
    const auto net = make_gated_attention(small_dims(), rng);
    const std::size_t n = 2 + draw % 7;
    const Matrix x = Matrix::normal(n, 6, 2.0, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto a = cbpa_forward(net, x);
    const auto b = cbpa_forward(net, select_rows(x, perm));
    EXPECT_NEAR(std::accumulate(a.attention_weights.begin(), a.attention_weights.end(), 0.0), 1.0,
                1e-6);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GE(a.attention_weights[i], 0.0);
      EXPECT_NEAR(b.attention_weights[i], a.attention_weights[perm[i]], 1e-12);
    }
    for (std::size_t c = 0; c < a.vector.cols(); ++c)
      EXPECT_NEAR(a.vector(0, c), b.vector(0, c), 1e-9);
  }
}

TEST(Aggregator, ScoreShiftLeavesWeightsUnchanged) {
  Rng rng(9);
  auto net = make_gated_attention(small_dims(), rng);
  const Matrix x = Matrix::normal(6, 6, 1.0, rng);
  const auto before = cbpa_forward(net, x);
  const auto scores = attention_scores(net, x);
  net.score.bias(0, 0) += 17.0;
  const auto shifted = attention_scores(net, x);
  const auto after = cbpa_forward(net, x);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(shifted[i] - scores[i], 17.0, 1e-12);
    EXPECT_NEAR(before.attention_weights[i], after.attention_weights[i], 1e-12);
  }
}

TEST(Aggregator, GradientMatchesFiniteDifferences) {
  for (int seed = 0; seed < 5; ++seed) {
    Rng rng(700 + seed);
    auto net = make_gated_attention(small_dims(), rng);
    Matrix x = Matrix::normal(4, 6, 1.0, rng);
    const Matrix dv = Matrix::normal(1, 5, 1.0, rng);
    const Matrix dw = Matrix::normal(1, 4, 1.0, rng);
    auto loss = [&] {
      const auto s = cbpa_forward(net, x);
      return weighted_sum(s.vector, dv) + dot(s.attention_weights, dw.values());
    };
    auto g = cbpa_backward(net, x, dv, dw.values());
    EXPECT_LT(relative_error(g.patches, numeric_gradient(x, loss)), kGradTolerance);
    auto params = net.params();
    auto grads = g.params.params();
    for (std::size_t i = 0; i < params.size(); ++i)
      EXPECT_LT(relative_error(grads[i].value, numeric_gradient(params[i].value, loss)),
                kGradTolerance)
          << params[i].name;
  }
}

TEST(Projector, SingleTokenPoolsWithWeightOne) {
  Rng rng(4);
  const auto p = make_projector({5, 4, 6, 3}, rng);
  const auto r = project(p, Matrix::normal(1, 5, 3.0, rng));
  ASSERT_EQ(r.pool_weights.size(), 1u);
  EXPECT_EQ(r.pool_weights[0], 1.0);
  EXPECT_EQ(r.output.cols(), 3u);
}

TEST(Projector, DefaultOutputIs4096) {
  Rng rng(5);
  const auto p = make_projector({}, rng);
  const auto r = project(p, Matrix::normal(1, 512, 1.0, rng));
  EXPECT_EQ(r.output.cols(), 4096u);
  EXPECT_TRUE(r.output.all_finite());
}

TEST(Projector, DimensionMismatch) {
  Rng rng(6);
  const auto p = make_projector({5, 4, 6, 3}, rng);
  EXPECT_THROW(project(p, Matrix(1, 4)), DimensionError);
}

// pooler ∘ layer_norm ∘ (linear, gelu, linear), traced by hand with loops.
TEST(Projector, MatchesComposedOracle) {
  VisionProjector p;
  p.pooler.query = Matrix{{0.5, -1.0}};
  p.pooler.query_proj = {Matrix{{1, 0}, {0, 1}}, Matrix{{0, 0}}};
  p.pooler.key_proj = {Matrix{{1, 2}, {0, 1}}, Matrix{{0, 0}}};
  p.pooler.value_proj = {Matrix{{2, 0}, {1, -1}}, Matrix{{0.5, 0}}};
  p.pooler.out_proj = {Matrix{{1, 1}, {0, 2}}, Matrix{{0, -1}}};
  p.norm = {Matrix{{1.5, 0.5}}, Matrix{{0.1, -0.2}}};
  p.mlp_in = {Matrix{{1, -1}, {2, 1}, {0, 1}}, Matrix{{0, 0.5, -0.5}}};
  p.mlp_out = {Matrix{{1, 0, 1}}, Matrix{{0.25}}};
  const double slide[2] = {0.3, -0.7};

  // One token: pooled context is exactly the value row.
  const double v0 = 2 * slide[0] + 0.5, v1 = slide[0] - slide[1];
  const double o0 = v0 + v1, o1 = 2 * v1 - 1;
  const double mean = (o0 + o1) / 2;
  const double var = ((o0 - mean) * (o0 - mean) + (o1 - mean) * (o1 - mean)) / 2;
  const double inv = 1 / std::sqrt(var + 1e-5);
  const double n0 = (o0 - mean) * inv * 1.5 + 0.1, n1 = (o1 - mean) * inv * 0.5 - 0.2;
  auto g = [](double x) {
    return 0.5 * x * (1 + std::tanh(std::sqrt(2 / M_PI) * (x + 0.044715 * x * x * x)));
  };
  // mlp_out ignores the middle hidden unit.
  const double hid0 = g(n0 - n1), hid2 = g(n1 - 0.5);
  const double expected = hid0 + hid2 + 0.25;

  const auto r = project(p, Matrix{{slide[0], slide[1]}});
  EXPECT_NEAR(r.output(0, 0), expected, 1e-13);
}

TEST(Projector, GradientMatchesFiniteDifferencesForOneAndManyTokens) {
  for (std::size_t tokens : {1u, 3u}) {
    for (int seed = 0; seed < 4; ++seed) {
      Rng rng(800 + seed);
      auto p = make_projector({5, 4, 6, 3}, rng);
      Matrix x = Matrix::normal(tokens, 5, 1.0, rng);
      const Matrix up = Matrix::normal(1, 3, 1.0, rng);
      auto loss = [&] { return weighted_sum(project(p, x).output, up); };
      auto g = project_backward(p, x, up);
      EXPECT_LT(relative_error(g.tokens, numeric_gradient(x, loss)), kGradTolerance);
      auto params = p.params();
      auto grads = g.params.params();
      for (std::size_t i = 0; i < params.size(); ++i)
        EXPECT_LT(relative_error(grads[i].value, numeric_gradient(params[i].value, loss)),
                  kGradTolerance)
            << params[i].name << " tokens=" << tokens;
    }
  }
}

TEST(Tower, FullPipelineGradientMatchesFiniteDifferences) {
  for (int seed = 0; seed < 3; ++seed) {
    Rng rng(900 + seed);
    auto tower = make_tower(small_tower(), rng);
    Matrix x = Matrix::normal(5, 6, 1.0, rng);
    const Matrix up = Matrix::normal(1, 3, 1.0, rng);
    auto loss = [&] { return weighted_sum(tower_forward(tower, x).projection.output, up); };
    auto g = tower_backward(tower, x, up);
    EXPECT_LT(relative_error(g.patches, numeric_gradient(x, loss)), kGradTolerance);
    auto params = tower.params();
    auto grads = g.params.params();
    ASSERT_EQ(params.size(), grads.size());
    for (std::size_t i = 0; i < params.size(); ++i)
      EXPECT_LT(relative_error(grads[i].value, numeric_gradient(params[i].value, loss)),
                kGradTolerance)
          << params[i].name;
  }
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("slidekit_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, RoundTripPreservesFloat32Values) {
  Rng rng(10);
  auto tower = make_tower(small_tower(), rng);
  save_checkpoint(dir_.string(), tower);
  auto loaded = load_checkpoint(dir_.string());
  auto a = tower.params();
  auto b = loaded.params();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i].value.get();
    const auto& y = b[i].value.get();
    ASSERT_EQ(x.shape_string(), y.shape_string());
    for (std::size_t k = 0; k < x.size(); ++k)
      EXPECT_EQ(y.values()[k], static_cast<double>(static_cast<float>(x.values()[k])));
  }
}

TEST_F(CheckpointTest, MissingOrMisshapenTensorIsRejected) {
  Rng rng(11);
  auto tower = make_tower(small_tower(), rng);
  save_checkpoint(dir_.string(), tower);
  save_cxpm((dir_ / "aggregator.fc.weight.cxpm").string(), Matrix(2, 2));
  EXPECT_THROW(load_checkpoint(dir_.string()), FormatError);
  std::filesystem::remove(dir_ / "aggregator.fc.weight.cxpm");
  EXPECT_THROW(load_checkpoint(dir_.string()), FormatError);
}

}  // namespace
}  // namespace slidekit::vision
