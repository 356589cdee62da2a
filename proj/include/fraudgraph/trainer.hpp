#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fraudgraph/common.hpp"
#include "fraudgraph/dual_pgnn.hpp"
#include "fraudgraph/embed.hpp"
#include "fraudgraph/metrics.hpp"
#include "fraudgraph/optim.hpp"
#include "fraudgraph/split_policy.hpp"
#include "fraudgraph/subgraph.hpp"
#include "fraudgraph/summary.hpp"

namespace fraudgraph {

struct TrainConfig {
  int outer_epochs = 2;
  int inner_epochs = 10;
  double lr_policy = 5e-6;
  double lr_gnn = 1e-3;
  double ema_momentum = 0.9;
  double lambda1 = 0.05;
  double lambda2 = 0.3;
  double weight_decay = 0.0;
  std::uint64_t seed = 7;
  int early_stop_patience = 5;  // <= 0 disables early stopping
  double policy_temperature = 1.0;

  LossWeights loss_weights() const { return {lambda1, lambda2}; }

  void validate() const {
    if (outer_epochs < 0 || inner_epochs < 0) throw ConfigError("epoch counts must be non-negative");
    if (!(lr_policy >= 0.0) || !(lr_gnn >= 0.0)) throw ConfigError("learning rates must be non-negative");
    if (!(ema_momentum >= 0.0 && ema_momentum < 1.0)) throw ConfigError("ema_momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (!(policy_temperature > 0.0)) throw ConfigError("policy_temperature must be positive");
    loss_weights().validate();
  }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"outer_epochs", c.outer_epochs},   {"inner_epochs", c.inner_epochs},
          {"lr_policy", c.lr_policy},         {"lr_gnn", c.lr_gnn},
          {"ema_momentum", c.ema_momentum},   {"lambda1", c.lambda1},
          {"lambda2", c.lambda2},             {"weight_decay", c.weight_decay},
          {"seed", c.seed},                   {"early_stop_patience", c.early_stop_patience},
          {"policy_temperature", c.policy_temperature}};
}

// ---------------------------------------------------------------------------
// Text corpus: per-account sentences, policy features and the fixed
// embedding of the unsplit summary.
// ---------------------------------------------------------------------------

struct NodeText {
  std::vector<std::string> sentences;
  Matrix policy_features;
  std::vector<double> orig_embedding;
};

class SummaryCorpus {
 public:
  explicit SummaryCorpus(const TextEmbedder& embedder) : embedder_(embedder) {}

  void add(NodeId node, const std::vector<std::string>& sentences) {
    if (sentences.empty()) throw DataError("summary of node " + std::to_string(node) + " has no sentences");
    NodeText t;
    t.sentences = sentences;
    t.policy_features = featurize(sentences);
    t.orig_embedding = embedder_.embed(join_sentences(sentences));
    texts_[node] = std::move(t);
  }

  bool contains(NodeId node) const { return texts_.count(node) > 0; }
  const NodeText& at(NodeId node) const {
    auto it = texts_.find(node);
    if (it == texts_.end()) throw DataError("missing cached summary for node " + std::to_string(node));
    return it->second;
  }
  const TextEmbedder& embedder() const { return embedder_; }
  std::size_t size() const { return texts_.size(); }

 private:
  TextEmbedder embedder_;
  std::unordered_map<NodeId, NodeText> texts_;
};

// Embeddings of one node's discriminative and residual texts. An empty
// residual side encodes as the zero vector.
struct SplitViews {
  std::vector<double> disc;
  std::vector<double> resi;
};

inline SplitViews embed_split(const SummarySplit& s, const TextEmbedder& e) {
  SplitViews v;
  v.disc = e.embed(s.disc_text);
  v.resi = s.resi_text.empty() ? std::vector<double>(e.dim(), 0.0) : e.embed(s.resi_text);
  return v;
}

struct TrainingSample {
  NodeId center = 0;
  int label = 0;
  Subgraph sub;
  Matrix adjacency;
};

inline TrainingSample make_sample(Subgraph sub, int label) {
  TrainingSample s;
  s.center = sub.center;
  s.label = label;
  s.adjacency = normalized_adjacency(sub);
  s.sub = std::move(sub);
  return s;
}

using ViewTable = std::unordered_map<NodeId, SplitViews>;

// Deterministic-mode views for every node appearing in the samples.
inline ViewTable deterministic_views(const std::vector<const TrainingSample*>& samples, const SummaryCorpus& corpus,
                                     const SplitPolicy& policy) {
  ViewTable table;
  for (const auto* s : samples) {
    for (NodeId v : s->sub.nodes) {
      if (table.count(v)) continue;
      const auto& t = corpus.at(v);
      table.emplace(v, embed_split(split_summary(t.sentences, t.policy_features, policy, SplitMode::deterministic,
                                                 static_cast<std::mt19937_64*>(nullptr)),
                                   corpus.embedder()));
    }
  }
  return table;
}

inline SampleFeatures assemble_features(const TrainingSample& s, const SummaryCorpus& corpus, const ViewTable& views,
                                        const SplitViews* center_override = nullptr) {
  const std::size_t n = s.sub.nodes.size(), d = corpus.embedder().dim();
  SampleFeatures x{Matrix(n, d), Matrix(n, d), Matrix(n, d)};
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId v = s.sub.nodes[i];
    const SplitViews* sv = (center_override && v == s.center) ? center_override : nullptr;
    if (!sv) {
      auto it = views.find(v);
      if (it == views.end()) throw DataError("no split view for node " + std::to_string(v));
      sv = &it->second;
    }
    std::copy(sv->disc.begin(), sv->disc.end(), x.disc.row(i).begin());
    std::copy(sv->resi.begin(), sv->resi.end(), x.resi.row(i).begin());
    const auto& o = corpus.at(v).orig_embedding;
    std::copy(o.begin(), o.end(), x.orig.row(i).begin());
  }
  return x;
}

inline std::size_t center_row(const TrainingSample& s) {
  auto i = s.sub.local_index(s.center);
  if (!i) throw DataError("center missing from its subgraph");
  return *i;
}

// ---------------------------------------------------------------------------
// Stage 1: policy update by REINFORCE with the encoder frozen.
// ---------------------------------------------------------------------------

struct Stage1Stats {
  std::size_t steps = 0;
  double mean_reward = 0.0;
  double mean_loss = 0.0;
};

// Policy-gradient state carried across Stage-1 epochs.
struct PolicyTrainer {
  SplitPolicy policy;
  AdamW optimizer;
  BaselineState baseline;
};

inline PolicyTrainer make_policy_trainer(const TrainConfig& cfg, SplitPolicy policy = {}) {
  policy.temperature = cfg.policy_temperature;
  PolicyTrainer t{std::move(policy), AdamW({cfg.lr_policy, 0.9, 0.999, 1e-8, 0.0}), BaselineState{}};
  t.baseline.momentum = cfg.ema_momentum;
  return t;
}

// One pass over `train` in seeded-shuffled order: sample the center's split,
// score it with the frozen encoder, turn the tri-view loss into a reward and
// step the policy along -A * grad(log p_disc + log p_resi). Neighbour views
// use deterministic splits of the policy as it stood at epoch start.
template <typename Rng>
Stage1Stats stage1_epoch(const std::vector<const TrainingSample*>& train, PolicyTrainer& pt,
                         const DualPathParams& frozen, const SummaryCorpus& corpus, const TrainConfig& cfg, Rng& rng) {
  Stage1Stats st;
  if (train.empty()) return st;
  const ViewTable views = deterministic_views(train, corpus, pt.policy);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_in_place(order, rng);
  const LossWeights lw = cfg.loss_weights();
  for (std::size_t idx : order) {
    const TrainingSample& s = *train[idx];
    const NodeText& t = corpus.at(s.center);
    SummarySplit split = split_summary(t.sentences, t.policy_features, pt.policy, SplitMode::sample, &rng);
    SplitViews cv = embed_split(split, corpus.embedder());
    SampleFeatures x = assemble_features(s, corpus, views, &cv);
    ForwardState fs = forward_sample(x, s.adjacency, center_row(s), frozen, s.label, lw);
    const double reward = reward_from_loss(fs.loss.total);
    const double adv = pt.baseline.advantage(reward);
    pt.baseline = update_baseline(pt.baseline, reward);
    auto glogp = split_log_prob_gradient(split, t.policy_features, pt.policy);
    for (double& g : glogp) g *= -adv;
    auto flat = pt.policy.flat();
    pt.optimizer.step({std::span<double>(flat)}, {std::span<const double>(glogp)});
    pt.policy.set_flat(flat);
    st.mean_reward += reward;
    st.mean_loss += fs.loss.total;
    ++st.steps;
  }
  st.mean_reward /= static_cast<double>(st.steps);
  st.mean_loss /= static_cast<double>(st.steps);
  return st;
}

// ---------------------------------------------------------------------------
// Stage 2: encoder update by backprop with the policy frozen.
// ---------------------------------------------------------------------------

struct Stage2Stats {
  std::size_t steps = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

template <typename Rng>
Stage2Stats stage2_epoch(const std::vector<const TrainingSample*>& train, const ViewTable& frozen_views,
                         DualPathParams& params, AdamW& optimizer, const SummaryCorpus& corpus, const TrainConfig& cfg,
                         Rng& rng) {
  Stage2Stats st;
  if (train.empty()) return st;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_in_place(order, rng);
  const LossWeights lw = cfg.loss_weights();
  std::size_t correct = 0;
  for (std::size_t idx : order) {
    const TrainingSample& s = *train[idx];
    SampleFeatures x = assemble_features(s, corpus, frozen_views);
    const std::size_t c = center_row(s);
    ForwardState fs = forward_sample(x, s.adjacency, c, params, s.label, lw);
    DualPathParams grad = params.zeros_like();
    backward_sample(x, s.adjacency, c, params, s.label, lw, fs, grad);
    std::vector<std::span<const double>> gb;
    for (auto b : grad.blocks()) gb.emplace_back(b.data(), b.size());
    optimizer.step(params.blocks(), gb);
    if (!params.all_finite()) throw NumericError("encoder parameters became non-finite");
    st.mean_loss += fs.loss.total;
    correct += static_cast<std::size_t>((fs.p_disc >= 0.5) == (s.label == 1));
    ++st.steps;
  }
  st.mean_loss /= static_cast<double>(st.steps);
  st.train_accuracy = static_cast<double>(correct) / static_cast<double>(st.steps);
  return st;
}

// Inference path: deterministic discriminative split and the original summary
// through the two branches, fused, FC head.
inline std::vector<double> predict_samples(const std::vector<const TrainingSample*>& samples, const ViewTable& views,
                                           const DualPathParams& params, const SummaryCorpus& corpus) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto* s : samples) {
    SampleFeatures x = assemble_features(*s, corpus, views);
    out.push_back(predict_probability(x.disc, x.orig, s->adjacency, center_row(*s), params));
  }
  return out;
}

inline double f1_at_half(const std::vector<const TrainingSample*>& samples, const std::vector<double>& probs) {
  ScoreSet set;
  for (std::size_t i = 0; i < samples.size(); ++i) set.scores.push_back({"", samples[i]->label, probs[i]});
  auto r = compute_metrics(set);
  return r.f1.value_or(0.0);
}

// ---------------------------------------------------------------------------
// Alternating schedule
// ---------------------------------------------------------------------------

struct EpochLog {
  int outer = 0;
  int inner = 0;  // 0 for the policy stage
  std::string stage;  // "policy" | "encoder"
  double mean_loss = 0.0;
  std::optional<double> mean_reward;
  std::optional<double> val_f1;
  std::int64_t timestamp = 0;
};

inline std::string epoch_log_line(const EpochLog& e) {
  nlohmann::json j{{"outer", e.outer},
                   {"inner", e.inner},
                   {"stage", e.stage},
                   {"mean_loss", e.mean_loss},
                   {"mean_reward", e.mean_reward ? nlohmann::json(*e.mean_reward) : nlohmann::json(nullptr)},
                   {"val_f1", e.val_f1 ? nlohmann::json(*e.val_f1) : nlohmann::json(nullptr)},
                   {"timestamp", e.timestamp}};
  return j.dump();
}

struct TrainResult {
  DualPathParams best_params;
  SplitPolicy best_policy;
  DualPathParams final_params;
  SplitPolicy final_policy;
  double best_val_f1 = -1.0;
  int best_outer = 0;
  int best_inner = 0;
  bool stopped_early = false;
  std::vector<EpochLog> log;

  std::string log_jsonl() const {
    std::string s;
    for (const auto& e : log) s += epoch_log_line(e) + "\n";
    return s;
  }
};

struct TrainHooks {
  Clock clock;  // wall clock when empty
  std::function<void(const EpochLog&)> on_epoch;
  // Called with parameter digests before/after every stage (freeze audits).
  std::function<void(const std::string& stage, const std::string& params_before, const std::string& params_after,
                     const std::string& policy_before, const std::string& policy_after)>
      on_stage;
};

// outer_epochs x [one policy epoch, inner_epochs encoder epochs]. Validation
// F1 after every encoder epoch selects the retained checkpoint; training
// stops after `early_stop_patience` encoder epochs without improvement.
inline TrainResult alternate_train(const std::vector<const TrainingSample*>& train,
                                   const std::vector<const TrainingSample*>& val, const SummaryCorpus& corpus,
                                   const TrainConfig& cfg, DualPathParams init, const TrainHooks& hooks = {}) {
  cfg.validate();
  if (val.empty()) throw ConfigError("validation split is empty");
  if (train.empty()) throw ConfigError("training split is empty");
  std::mt19937_64 rng(cfg.seed);
  PolicyTrainer pt = make_policy_trainer(cfg);
  DualPathParams params = std::move(init);
  AdamW enc_opt({cfg.lr_gnn, 0.9, 0.999, 1e-8, cfg.weight_decay});

  TrainResult res;
  res.best_params = params;
  res.best_policy = pt.policy;
  int stale = 0;
  auto emit = [&](EpochLog e) {
    e.timestamp = hooks.clock ? hooks.clock() : wall_clock_seconds();
    if (hooks.on_epoch) hooks.on_epoch(e);
    res.log.push_back(std::move(e));
  };

  for (int outer = 1; outer <= cfg.outer_epochs && !res.stopped_early; ++outer) {
    {
      const auto pd = params.digest(), qd = pt.policy.digest();
      Stage1Stats s1 = stage1_epoch(train, pt, params, corpus, cfg, rng);
      if (hooks.on_stage) hooks.on_stage("policy", pd, params.digest(), qd, pt.policy.digest());
      emit({outer, 0, "policy", s1.mean_loss, s1.mean_reward, std::nullopt, 0});
    }
    std::vector<const TrainingSample*> all = train;
    all.insert(all.end(), val.begin(), val.end());
    const ViewTable views = deterministic_views(all, corpus, pt.policy);
    for (int inner = 1; inner <= cfg.inner_epochs; ++inner) {
      const auto pd = params.digest(), qd = pt.policy.digest();
      Stage2Stats s2 = stage2_epoch(train, views, params, enc_opt, corpus, cfg, rng);
      if (hooks.on_stage) hooks.on_stage("encoder", pd, params.digest(), qd, pt.policy.digest());
      const double f1 = f1_at_half(val, predict_samples(val, views, params, corpus));
      emit({outer, inner, "encoder", s2.mean_loss, std::nullopt, f1, 0});
      if (f1 > res.best_val_f1) {
        res.best_val_f1 = f1;
        res.best_params = params;
        res.best_policy = pt.policy;
        res.best_outer = outer;
        res.best_inner = inner;
        stale = 0;
      } else if (cfg.early_stop_patience > 0 && ++stale >= cfg.early_stop_patience) {
        res.stopped_early = true;
        break;
      }
    }
  }
  res.final_params = params;
  res.final_policy = pt.policy;
  return res;
}

}  // namespace fraudgraph
