#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraudgraph/common.hpp"
#include "fraudgraph/matrix.hpp"
#include "fraudgraph/split_policy.hpp"

namespace fraudgraph {

inline constexpr std::size_t kHiddenWidth = 64;
inline constexpr double kProbabilityClamp = 1e-7;

// One encoder branch: a two-layer graph backbone plus a linear projection of
// the raw input features,
//   H1 = relu(A X W1 + b1),  Z = A H1 W2 + b2 + X Wt + bt,
// with A the symmetric-normalised adjacency including self loops.
struct BranchParams {
  Matrix w1, b1, w2, b2, w_theta, b_theta;

  BranchParams() = default;
  BranchParams(std::size_t in_dim, std::size_t hidden)
      : w1(in_dim, hidden), b1(1, hidden), w2(hidden, hidden), b2(1, hidden), w_theta(in_dim, hidden), b_theta(1, hidden) {}

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".w1", w1);
    f(prefix + ".b1", b1);
    f(prefix + ".w2", w2);
    f(prefix + ".b2", b2);
    f(prefix + ".w_theta", w_theta);
    f(prefix + ".b_theta", b_theta);
  }

  friend bool operator==(const BranchParams&, const BranchParams&) = default;
};

// All learnable parameters. The summary branch encodes both the
// discriminative and the residual summaries; the original branch encodes the
// unsplit summary. Attention scoring and the FC head are shared.
struct DualPathParams {
  BranchParams summary;
  BranchParams original;
  Matrix attn;       // 1 x hidden; a shared score bias would cancel in the softmax
  Matrix fc;         // 1 x hidden
  Matrix fc_bias;    // 1 x 1

  DualPathParams() = default;
  DualPathParams(std::size_t in_dim, std::size_t hidden = kHiddenWidth)
      : summary(in_dim, hidden), original(in_dim, hidden), attn(1, hidden), fc(1, hidden), fc_bias(1, 1) {}

  std::size_t in_dim() const { return summary.w1.rows(); }
  std::size_t hidden() const { return summary.w1.cols(); }

  template <typename F>
  void visit(F&& f) {
    summary.visit("summary", f);
    original.visit("original", f);
    f(std::string("attn"), attn);
    f(std::string("fc"), fc);
    f(std::string("fc_bias"), fc_bias);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<DualPathParams*>(this)->visit([&](const std::string& n, Matrix& m) { f(n, static_cast<const Matrix&>(m)); });
  }

  DualPathParams zeros_like() const {
    DualPathParams z = *this;
    z.visit([](const std::string&, Matrix& m) { m.fill(0.0); });
    return z;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Matrix& m) { n += m.size(); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    visit([&](const std::string&, const Matrix& m) { ok = ok && m.all_finite(); });
    return ok;
  }

  std::string digest() const {
    std::string bytes;
    visit([&](const std::string& n, const Matrix& m) {
      bytes += n;
      bytes.append(reinterpret_cast<const char*>(m.data().data()), m.size() * sizeof(double));
    });
    return content_digest(bytes);
  }

  std::vector<std::span<double>> blocks() {
    std::vector<std::span<double>> out;
    visit([&](const std::string&, Matrix& m) { out.emplace_back(m.data()); });
    return out;
  }

  friend bool operator==(const DualPathParams&, const DualPathParams&) = default;
};

// Glorot-uniform weights, zero biases, zero attention, small FC head.
inline DualPathParams init_params(std::size_t in_dim, std::uint64_t seed, std::size_t hidden = kHiddenWidth) {
  DualPathParams p(in_dim, hidden);
  std::mt19937_64 rng(seed);
  auto glorot = [&](Matrix& m) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (double& x : m.data()) x = (2.0 * uniform01(rng) - 1.0) * a;
  };
  glorot(p.summary.w1);
  glorot(p.summary.w2);
  glorot(p.summary.w_theta);
  glorot(p.original.w1);
  glorot(p.original.w2);
  glorot(p.original.w_theta);
  glorot(p.fc);
  return p;
}

// ---------------------------------------------------------------------------
// Forward pieces
// ---------------------------------------------------------------------------

struct BranchCache {
  Matrix ax;    // A X
  Matrix pre1;  // A X W1 + b1
  Matrix h1;    // relu(pre1)
  Matrix ah1;   // A H1
};

enum class BranchRole { disc, resi, orig };

inline Matrix gnn_forward(const Matrix& features, const Matrix& adjacency, const BranchParams& p,
                          BranchCache* cache = nullptr) {
  const std::size_t n = features.rows();
  if (adjacency.rows() != n || adjacency.cols() != n)
    throw ShapeError("adjacency " + adjacency.shape_string() + " does not match " + std::to_string(n) + " feature rows");
  if (features.cols() != p.w1.rows())
    throw ShapeError("features " + features.shape_string() + " do not match layer-1 weights " + p.w1.shape_string());
  if (features.cols() != p.w_theta.rows())
    throw ShapeError("features " + features.shape_string() + " do not match projection weights " +
                     p.w_theta.shape_string());
  if (p.w2.rows() != p.w1.cols()) throw ShapeError("layer-2 weights " + p.w2.shape_string() + " do not chain");

  BranchCache local;
  BranchCache& c = cache ? *cache : local;
  c.ax = matmul(adjacency, features);
  c.pre1 = matmul(c.ax, p.w1);
  add_row_vector(c.pre1, p.b1.row(0));
  c.h1 = c.pre1;
  for (double& x : c.h1.data()) x = x > 0.0 ? x : 0.0;
  c.ah1 = matmul(adjacency, c.h1);
  Matrix z = matmul(c.ah1, p.w2);
  add_row_vector(z, p.b2.row(0));
  z += matmul(features, p.w_theta);
  add_row_vector(z, p.b_theta.row(0));
  return z;
}

// Which parameter set encodes a role.
inline const BranchParams& branch_params(const DualPathParams& p, BranchRole role) {
  return role == BranchRole::orig ? p.original : p.summary;
}

inline Matrix gnn_forward(const Matrix& features, const Matrix& adjacency, const DualPathParams& p, BranchRole role) {
  return gnn_forward(features, adjacency, branch_params(p, role));
}

struct FusionResult {
  Matrix fused;
  double w_branch = 0.5;
  double w_orig = 0.5;
  std::vector<double> pooled_branch;
  std::vector<double> pooled_orig;
};

inline std::vector<double> mean_pool(const Matrix& z) {
  auto s = column_sums(z);
  for (double& x : s) x /= static_cast<double>(z.rows());
  return s;
}

// Scores s = a . meanpool(Z) for both operands, softmax over the pair,
// then the convex combination of the two node-embedding matrices.
inline FusionResult attention_fuse(const Matrix& z_branch, const Matrix& z_orig, const DualPathParams& p) {
  z_branch.require_same_shape(z_orig, "attention_fuse");
  if (z_branch.cols() != p.attn.cols()) throw ShapeError("attention vector does not match embedding width");
  FusionResult r;
  r.pooled_branch = mean_pool(z_branch);
  r.pooled_orig = mean_pool(z_orig);
  const double s1 = dot(p.attn.row(0), r.pooled_branch);
  const double s2 = dot(p.attn.row(0), r.pooled_orig);
  const double m = std::max(s1, s2);
  const double e1 = std::exp(s1 - m), e2 = std::exp(s2 - m);
  r.w_branch = e1 / (e1 + e2);
  r.w_orig = e2 / (e1 + e2);
  r.fused = z_branch;
  r.fused *= r.w_branch;
  for (std::size_t i = 0; i < r.fused.size(); ++i) r.fused.data()[i] += r.w_orig * z_orig.data()[i];
  return r;
}

inline double center_logit(const Matrix& fused, std::size_t center_row, const DualPathParams& p) {
  if (center_row >= fused.rows()) throw ShapeError("center row out of range");
  return dot(p.fc.row(0), fused.row(center_row)) + p.fc_bias(0, 0);
}

inline double predict_center(const Matrix& fused, std::size_t center_row, const DualPathParams& p) {
  return sigmoid(center_logit(fused, center_row, p));
}

// ---------------------------------------------------------------------------
// Tri-view loss
// ---------------------------------------------------------------------------

struct LossWeights {
  double lambda1 = 0.05;
  double lambda2 = 0.3;

  void validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("loss weights lambda1/lambda2 must be non-negative");
  }
};

struct LossTerms {
  double total = 0.0;
  double disc = 0.0;    // BCE of the discriminative prediction
  double resi = 0.0;    // KL of the residual prediction to uniform
  double orth = 0.0;    // squared dot product of the two center embeddings
};

inline double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

inline double xlogx_over_half(double p) { return p > 0.0 ? p * std::log(2.0 * p) : 0.0; }

inline LossTerms triview_loss(double p_disc, double p_resi, std::span<const double> s_disc, std::span<const double> s_resi,
                              int label, const LossWeights& w) {
  w.validate();
  if (s_disc.size() != s_resi.size()) throw ShapeError("center embeddings differ in width");
  const double pd = clamp_probability(p_disc);
  const double pr = clamp_probability(p_resi);
  LossTerms t;
  t.disc = -(label == 1 ? std::log(pd) : std::log1p(-pd));
  t.resi = xlogx_over_half(pr) + xlogx_over_half(1.0 - pr);
  const double d = dot(s_disc, s_resi);
  t.orth = d * d;
  t.total = t.disc + w.lambda1 * t.resi + w.lambda2 * t.orth;
  return t;
}

// ---------------------------------------------------------------------------
// Full sample forward/backward
// ---------------------------------------------------------------------------

// Node-feature matrices of one subgraph for the three summary views, rows in
// subgraph node order.
struct SampleFeatures {
  Matrix disc;
  Matrix resi;
  Matrix orig;
};

struct ForwardState {
  BranchCache cache_disc, cache_resi, cache_orig;
  Matrix z_disc, z_resi, z_orig;
  FusionResult fuse_disc, fuse_resi;
  double logit_disc = 0.0, logit_resi = 0.0;
  double p_disc = 0.5, p_resi = 0.5;
  LossTerms loss;
};

// Both branches, fusion, head and loss for one labelled center. The original
// view is encoded once and shared by the two fusions.
inline ForwardState forward_sample(const SampleFeatures& x, const Matrix& adjacency, std::size_t center_row,
                                   const DualPathParams& p, int label, const LossWeights& w) {
  ForwardState s;
  s.z_disc = gnn_forward(x.disc, adjacency, p.summary, &s.cache_disc);
  s.z_resi = gnn_forward(x.resi, adjacency, p.summary, &s.cache_resi);
  s.z_orig = gnn_forward(x.orig, adjacency, p.original, &s.cache_orig);
  s.fuse_disc = attention_fuse(s.z_disc, s.z_orig, p);
  s.fuse_resi = attention_fuse(s.z_resi, s.z_orig, p);
  s.logit_disc = center_logit(s.fuse_disc.fused, center_row, p);
  s.logit_resi = center_logit(s.fuse_resi.fused, center_row, p);
  s.p_disc = sigmoid(s.logit_disc);
  s.p_resi = sigmoid(s.logit_resi);
  s.loss = triview_loss(s.p_disc, s.p_resi, s.fuse_disc.fused.row(center_row), s.fuse_resi.fused.row(center_row), label, w);
  return s;
}

// Inference: discriminative and original views through the two branches,
// fused, then the FC head.
inline double predict_probability(const Matrix& x_disc, const Matrix& x_orig, const Matrix& adjacency,
                                  std::size_t center_row, const DualPathParams& p) {
  Matrix zd = gnn_forward(x_disc, adjacency, p.summary);
  Matrix zo = gnn_forward(x_orig, adjacency, p.original);
  return predict_center(attention_fuse(zd, zo, p).fused, center_row, p);
}

namespace detail {

inline void backward_branch(const Matrix& features, const Matrix& adjacency, const BranchParams& p,
                            const BranchCache& c, const Matrix& dz, BranchParams& g) {
  g.w2 += matmul_tn(c.ah1, dz);
  g.w_theta += matmul_tn(features, dz);
  auto db = column_sums(dz);
  for (std::size_t j = 0; j < db.size(); ++j) {
    g.b2(0, j) += db[j];
    g.b_theta(0, j) += db[j];
  }
  Matrix d_ah1 = matmul_nt(dz, p.w2);
  Matrix d_h1 = matmul_tn(adjacency, d_ah1);  // A^T; A is symmetric but keep it general
  for (std::size_t i = 0; i < d_h1.size(); ++i)
    if (!(c.pre1.data()[i] > 0.0)) d_h1.data()[i] = 0.0;
  g.w1 += matmul_tn(c.ax, d_h1);
  auto db1 = column_sums(d_h1);
  for (std::size_t j = 0; j < db1.size(); ++j) g.b1(0, j) += db1[j];
}

// Given dL/dS (fused), accumulates into dZ_branch, dZ_orig and the attention
// parameter gradients.
inline void backward_fuse(const Matrix& z_branch, const Matrix& z_orig, const FusionResult& f, const Matrix& dfused,
                          const DualPathParams& p, Matrix& dz_branch, Matrix& dz_orig, DualPathParams& g) {
  double dw1 = 0.0, dw2 = 0.0;
  for (std::size_t i = 0; i < dfused.size(); ++i) {
    const double d = dfused.data()[i];
    dz_branch.data()[i] += f.w_branch * d;
    dz_orig.data()[i] += f.w_orig * d;
    dw1 += d * z_branch.data()[i];
    dw2 += d * z_orig.data()[i];
  }
  const double avg = f.w_branch * dw1 + f.w_orig * dw2;
  const double ds1 = f.w_branch * (dw1 - avg);
  const double ds2 = f.w_orig * (dw2 - avg);
  const double inv_n = 1.0 / static_cast<double>(z_branch.rows());
  for (std::size_t j = 0; j < p.attn.cols(); ++j) {
    g.attn(0, j) += ds1 * f.pooled_branch[j] + ds2 * f.pooled_orig[j];
    const double a = p.attn(0, j) * inv_n;
    for (std::size_t i = 0; i < z_branch.rows(); ++i) {
      dz_branch(i, j) += ds1 * a;
      dz_orig(i, j) += ds2 * a;
    }
  }
}

}  // namespace detail

// Gradient of the tri-view loss for one sample with respect to every
// parameter, accumulated into `grad`. Clamped probabilities pass no gradient.
inline void backward_sample(const SampleFeatures& x, const Matrix& adjacency, std::size_t center_row,
                            const DualPathParams& p, int label, const LossWeights& w, const ForwardState& s,
                            DualPathParams& grad) {
  const double y = label == 1 ? 1.0 : 0.0;
  const bool d_free = s.p_disc > kProbabilityClamp && s.p_disc < 1.0 - kProbabilityClamp;
  const bool r_free = s.p_resi > kProbabilityClamp && s.p_resi < 1.0 - kProbabilityClamp;
  const double dlogit_d = d_free ? (s.p_disc - y) : 0.0;
  const double dlogit_r = r_free ? w.lambda1 * s.p_resi * (1.0 - s.p_resi) * s.logit_resi : 0.0;

  auto sd = s.fuse_disc.fused.row(center_row);
  auto sr = s.fuse_resi.fused.row(center_row);
  const double dprod = 2.0 * w.lambda2 * dot(sd, sr);
  const std::size_t h = p.hidden();

  Matrix dfd(s.fuse_disc.fused.rows(), h), dfr(s.fuse_resi.fused.rows(), h);
  for (std::size_t j = 0; j < h; ++j) {
    grad.fc(0, j) += dlogit_d * sd[j] + dlogit_r * sr[j];
    dfd(center_row, j) = dlogit_d * p.fc(0, j) + dprod * sr[j];
    dfr(center_row, j) = dlogit_r * p.fc(0, j) + dprod * sd[j];
  }
  grad.fc_bias(0, 0) += dlogit_d + dlogit_r;

  Matrix dzd(s.z_disc.rows(), h), dzr(s.z_resi.rows(), h), dzo(s.z_orig.rows(), h);
  detail::backward_fuse(s.z_disc, s.z_orig, s.fuse_disc, dfd, p, dzd, dzo, grad);
  detail::backward_fuse(s.z_resi, s.z_orig, s.fuse_resi, dfr, p, dzr, dzo, grad);
  detail::backward_branch(x.disc, adjacency, p.summary, s.cache_disc, dzd, grad.summary);
  detail::backward_branch(x.resi, adjacency, p.summary, s.cache_resi, dzr, grad.summary);
  detail::backward_branch(x.orig, adjacency, p.original, s.cache_orig, dzo, grad.original);
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json params_to_json(const DualPathParams& p) {
  nlohmann::json tensors = nlohmann::json::object();
  p.visit([&](const std::string& name, const Matrix& m) {
    tensors[name] = {{"shape", {m.rows(), m.cols()}}, {"data", m.data()}};
  });
  return {{"format", "fraudgraph.dual_pgnn"},
          {"version", kCheckpointVersion},
          {"in_dim", p.in_dim()},
          {"hidden", p.hidden()},
          {"tensors", std::move(tensors)}};
}

// Fails loudly on a missing tensor or any shape mismatch. Pass expected_in_dim
// to also check against the embedder in use.
inline DualPathParams params_from_json(const nlohmann::json& j, std::optional<std::size_t> expected_in_dim = std::nullopt) {
  try {
    if (j.value("format", "") != "fraudgraph.dual_pgnn") throw DataError("not a dual-path checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) throw DataError("unsupported checkpoint version");
    const auto in_dim = j.at("in_dim").get<std::size_t>();
    const auto hidden = j.at("hidden").get<std::size_t>();
    if (expected_in_dim && *expected_in_dim != in_dim)
      throw ShapeError("checkpoint input width " + std::to_string(in_dim) + " != expected " +
                       std::to_string(*expected_in_dim));
    DualPathParams p(in_dim, hidden);
    const auto& tensors = j.at("tensors");
    std::size_t expected = 0;
    p.visit([&](const std::string&, const Matrix&) { ++expected; });
    if (tensors.size() != expected)
      throw ShapeError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, expected " +
                       std::to_string(expected));
    p.visit([&](const std::string& name, Matrix& m) {
      if (!tensors.contains(name)) throw ShapeError("checkpoint is missing tensor " + name);
      const auto& t = tensors.at(name);
      auto shape = t.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols())
        throw ShapeError("tensor " + name + " has shape " + t.at("shape").dump() + ", expected " + m.shape_string());
      auto data = t.at("data").get<std::vector<double>>();
      if (data.size() != m.size()) throw ShapeError("tensor " + name + " has wrong element count");
      m.data() = std::move(data);
    });
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace fraudgraph
