#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fraudgraph/dual_pgnn.hpp"
#include "fraudgraph/embed.hpp"

using namespace fraudgraph;

namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    std::size_t j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

void set_identity(Matrix& m) {
  m.fill(0.0);
  for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) m(i, i) = 1.0;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(r, c);
  for (double& x : m.data()) x = nd(rng);
  return m;
}

// Symmetric normalised adjacency of a random undirected graph with self loops.
Matrix random_adjacency(std::size_t n, std::mt19937_64& rng) {
  Matrix a = Matrix::identity(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (uniform01(rng) < 0.4) a(i, j) = a(j, i) = 1.0;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) /= std::sqrt(deg[i] * deg[j]);
  return a;
}

DualPathParams random_params(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
  DualPathParams p(in, hidden);
  p.visit([&](const std::string&, Matrix& m) { m = random_matrix(m.rows(), m.cols(), rng, 0.5); });
  return p;
}

}  // namespace

TEST(TextEmbedder, UnitNormAndDeterministic) {
  TextEmbedder e;
  auto v = e.embed("Funds were relayed rapidly.");
  ASSERT_EQ(v.size(), 256u);
  EXPECT_NEAR(std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)), 1.0, 1e-12);
  EXPECT_EQ(v, TextEmbedder().embed("Funds were relayed rapidly."));
  EXPECT_NE(v, TextEmbedder(256, 99).embed("Funds were relayed rapidly."));
  EXPECT_THROW(e.embed("  "), DataError);
  EXPECT_THROW(TextEmbedder(0), ConfigError);
  EXPECT_THROW(TextEmbedder(16, 1, EmbedderBackend::external), ConfigError);
  auto punct = e.embed("...");
  EXPECT_NEAR(std::inner_product(punct.begin(), punct.end(), punct.begin(), 0.0), 1.0, 1e-12);
}

TEST(TextEmbedder, SimilarityReflectsSharedWording) {
  TextEmbedder e;
  const double unrelated = cosine_similarity(e.embed("high frequency transfers"), e.embed("dormant account"));
  EXPECT_LT(unrelated, 0.9);
  EXPECT_NEAR(unrelated, 0.0, 1e-12);
  // 5 shared hashed features out of 5 and 7.
  EXPECT_NEAR(cosine_similarity(e.embed("high frequency transfers"), e.embed("high frequency transfers observed")),
              5.0 / std::sqrt(35.0), 1e-12);
}

TEST(GnnForward, ZeroFeaturesGiveZeroOutput) {
  auto p = init_params(8, 3, 4);
  Matrix a = Matrix::identity(3);
  auto z = gnn_forward(Matrix(3, 8), a, p, BranchRole::disc);
  for (double x : z.data()) EXPECT_EQ(x, 0.0);
}

TEST(GnnForward, IdentityWeightsDoubleTheInput) {
  BranchParams p(2, 2);
  set_identity(p.w1);
  set_identity(p.w2);
  set_identity(p.w_theta);
  Matrix x = from_rows({{1.0, 2.0}, {3.0, 0.5}});
  auto z = gnn_forward(x, Matrix::identity(2), p);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(z.data()[i], 2.0 * x.data()[i]);
}

TEST(GnnForward, TwoNodeHandOracle) {
  BranchParams p(2, 2);
  set_identity(p.w1);
  set_identity(p.w2);
  set_identity(p.w_theta);
  p.b1 = from_rows({{-0.25, 0.0}});
  p.b2 = from_rows({{0.1, 0.0}});
  Matrix a = from_rows({{0.5, 0.5}, {0.5, 0.5}});
  Matrix x = from_rows({{1.0, 0.0}, {0.0, 1.0}});
  // AX = 0.5 everywhere; H1 = relu(0.5 - [0.25, 0]) = [0.25, 0.5]; AH1 = H1.
  auto z = gnn_forward(x, a, p);
  EXPECT_DOUBLE_EQ(z(0, 0), 0.25 + 0.1 + 1.0);
  EXPECT_DOUBLE_EQ(z(0, 1), 0.5 + 0.0 + 0.0);
  EXPECT_DOUBLE_EQ(z(1, 0), 0.25 + 0.1 + 0.0);
  EXPECT_DOUBLE_EQ(z(1, 1), 0.5 + 0.0 + 1.0);
}

TEST(GnnForward, ShapeErrors) {
  auto p = init_params(4, 1, 3);
  EXPECT_THROW(gnn_forward(Matrix(2, 4), Matrix::identity(3), p, BranchRole::orig), ShapeError);
  EXPECT_THROW(gnn_forward(Matrix(3, 5), Matrix::identity(3), p, BranchRole::orig), ShapeError);
  EXPECT_THROW(center_logit(Matrix(2, 3), 2, p), ShapeError);
}

TEST(GnnForward, PermutationEquivariance) {
  std::mt19937_64 rng(21);
  const std::size_t n = 6;
  auto p = random_params(5, 4, rng);
  auto x = random_matrix(n, 5, rng);
  auto a = random_adjacency(n, rng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix xp(n, 5), ap(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 5; ++k) xp(i, k) = x(perm[i], k);
    for (std::size_t j = 0; j < n; ++j) ap(i, j) = a(perm[i], perm[j]);
  }
  auto z = gnn_forward(x, a, p, BranchRole::disc);
  auto zp = gnn_forward(xp, ap, p, BranchRole::disc);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(zp(i, k), z(perm[i], k), 1e-12);
}

TEST(AttentionFuse, EqualOperandsPassThrough) {
  std::mt19937_64 rng(2);
  auto p = random_params(3, 4, rng);
  auto z = random_matrix(5, 4, rng);
  auto f = attention_fuse(z, z, p);
  EXPECT_DOUBLE_EQ(f.w_branch, 0.5);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(f.fused.data()[i], z.data()[i], 1e-15);
}

TEST(AttentionFuse, ScoreGapSetsWeights) {
  DualPathParams p(1, 1);
  Matrix zb = from_rows({{1.0}, {1.0}});
  Matrix zo = from_rows({{0.0}, {0.0}});
  p.attn(0, 0) = std::log(3.0);
  auto f = attention_fuse(zb, zo, p);
  EXPECT_NEAR(f.w_branch, 0.75, 1e-15);
  EXPECT_NEAR(f.w_orig, 0.25, 1e-15);
  EXPECT_NEAR(f.fused(0, 0), 0.75, 1e-15);
  p.attn(0, 0) = std::log(9.0);
  EXPECT_NEAR(attention_fuse(zb, zo, p).w_branch, 0.9, 1e-15);
  EXPECT_THROW(attention_fuse(zb, Matrix(3, 1), p), ShapeError);
}

TEST(AttentionFuse, OutputIsConvex) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = random_params(3, 4, rng);
    auto zb = random_matrix(4, 4, rng), zo = random_matrix(4, 4, rng);
    auto f = attention_fuse(zb, zo, p);
    EXPECT_NEAR(f.w_branch + f.w_orig, 1.0, 1e-15);
    for (std::size_t i = 0; i < zb.size(); ++i) {
      EXPECT_GE(f.fused.data()[i], std::min(zb.data()[i], zo.data()[i]) - 1e-12);
      EXPECT_LE(f.fused.data()[i], std::max(zb.data()[i], zo.data()[i]) + 1e-12);
    }
  }
}

TEST(Head, ZeroScoringVectorGivesHalf) {
  DualPathParams p(2, 3);
  std::mt19937_64 rng(1);
  EXPECT_DOUBLE_EQ(predict_center(random_matrix(2, 3, rng), 1, p), 0.5);
}

TEST(TriViewLoss, HandValues) {
  std::vector<double> zero{0.0, 0.0};
  const LossWeights w;
  auto t = triview_loss(0.5, 0.5, zero, zero, 1, w);
  EXPECT_NEAR(t.total, std::log(2.0), 1e-15);
  EXPECT_NEAR(t.resi, 0.0, 1e-15);
  // A fully confident residual prediction costs lambda1 * ln 2 (up to the clamp).
  auto c = triview_loss(0.5, 1.0, zero, zero, 1, w);
  EXPECT_NEAR(c.total - std::log(2.0), 0.05 * std::log(2.0), 1e-5);
  std::vector<double> sd{1.0, 2.0}, sr{3.0, 0.0};
  auto o = triview_loss(0.5, 0.5, sd, sr, 0, w);
  EXPECT_NEAR(o.orth, 9.0, 1e-15);
  EXPECT_NEAR(o.total, std::log(2.0) + 0.3 * 9.0, 1e-12);
  // Clamp keeps the loss finite.
  EXPECT_TRUE(std::isfinite(triview_loss(0.0, 0.5, zero, zero, 1, w).disc));
  EXPECT_NEAR(triview_loss(0.0, 0.5, zero, zero, 1, w).disc, -std::log(1e-7), 1e-6);
  EXPECT_THROW(triview_loss(0.5, 0.5, zero, std::vector<double>{1.0}, 1, w), ShapeError);
  EXPECT_THROW(triview_loss(0.5, 0.5, zero, zero, 1, LossWeights{-1.0, 0.3}), ConfigError);
}

TEST(Backward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(77);
  for (int inst = 0; inst < 5; ++inst) {
    const std::size_t n = 3 + inst, in = 4, hidden = 3;
    auto p = random_params(in, hidden, rng);
    SampleFeatures x{random_matrix(n, in, rng), random_matrix(n, in, rng), random_matrix(n, in, rng)};
    auto a = random_adjacency(n, rng);
    const int label = inst % 2;
    const LossWeights w;
    auto s = forward_sample(x, a, 0, p, label, w);
    auto g = p.zeros_like();
    backward_sample(x, a, 0, p, label, w, s, g);

    auto analytic = g.blocks();
    auto params = p.blocks();
    const double h = 1e-6;
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t k = 0; k < params[b].size(); ++k) {
        const double keep = params[b][k];
        params[b][k] = keep + h;
        const double up = forward_sample(x, a, 0, p, label, w).loss.total;
        params[b][k] = keep - h;
        const double dn = forward_sample(x, a, 0, p, label, w).loss.total;
        params[b][k] = keep;
        const double num = (up - dn) / (2 * h);
        const double denom = std::max({std::abs(num), std::abs(analytic[b][k]), 1e-6});
        EXPECT_LT(std::abs(num - analytic[b][k]) / denom, 1e-4) << "block " << b << " index " << k;
      }
    }
  }
}

TEST(Checkpoint, RoundTripAndMismatch) {
  auto p = init_params(6, 11, 5);
  auto j = params_to_json(p);
  auto back = params_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back, p);
  EXPECT_EQ(back.digest(), p.digest());
  EXPECT_EQ(p.parameter_count(), 2 * (6 * 5 + 5 + 5 * 5 + 5 + 6 * 5 + 5) + 5 + 5 + 1);
  EXPECT_THROW(params_from_json(j, 8), ShapeError);

  auto bad = j;
  bad["tensors"]["fc"]["shape"] = {1, 4};
  EXPECT_THROW(params_from_json(bad), ShapeError);
  auto extra = j;
  extra["tensors"]["attn_bias"] = {{"shape", {1, 1}}, {"data", {0.0}}};
  EXPECT_THROW(params_from_json(extra), ShapeError);
  auto missing = j;
  missing["tensors"].erase("attn");
  EXPECT_THROW(params_from_json(missing), ShapeError);
  auto version = j;
  version["version"] = 9;
  EXPECT_THROW(params_from_json(version), DataError);
  EXPECT_THROW(params_from_json(nlohmann::json::object()), DataError);
}

TEST(Params, InitIsSeededAndFinite) {
  auto a = init_params(10, 3, 8), b = init_params(10, 3, 8), c = init_params(10, 4, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.digest(), c.digest());
  EXPECT_TRUE(a.all_finite());
  for (double x : a.attn.data()) EXPECT_EQ(x, 0.0);
}
