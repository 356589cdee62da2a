#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraudgraph/common.hpp"
#include "fraudgraph/dossier.hpp"
#include "fraudgraph/dual_pgnn.hpp"
#include "fraudgraph/embed.hpp"
#include "fraudgraph/ingest.hpp"
#include "fraudgraph/metrics.hpp"
#include "fraudgraph/subgraph.hpp"
#include "fraudgraph/summary.hpp"
#include "fraudgraph/synthgen.hpp"
#include "fraudgraph/trainer.hpp"

namespace fraudgraph {

// Everything a run can be configured with. Loaded from a flat key=value file;
// '#' starts a comment.
struct PipelineConfig {
  TrainConfig train;
  SamplingConfig sampling;
  SplitRatios ratios;
  SynthConfig synth;
  std::size_t embed_dim = 256;
  std::uint64_t embed_seed = 0x5eed;
  std::size_t hidden = kHiddenWidth;
  std::size_t max_partner_rows = 200;
  unsigned max_in_flight = 4;
  double threshold = 0.5;
  std::string model = "forensic-analyst";
  std::string remote_url;
  int remote_timeout_seconds = 60;
  int remote_max_retries = 3;

  // One seed drives splitting, initialisation, training and generation.
  void set_seed(std::uint64_t s) {
    train.seed = s;
    synth.seed = s;
  }
  std::uint64_t seed() const { return train.seed; }

  PromptOptions prompt_options() const {
    PromptOptions p;
    p.max_partner_rows = max_partner_rows;
    return p;
  }
};

namespace detail {

inline double config_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  return d;
}

inline long long config_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long d = 0;
  try {
    d = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
  return d;
}

inline std::size_t config_count(const std::string& key, const std::string& v) {
  long long d = config_int(key, v);
  if (d < 0) throw ConfigError("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(d);
}

}  // namespace detail

inline void apply_config_value(PipelineConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "outer_epochs") c.train.outer_epochs = static_cast<int>(config_int(key, v));
  else if (key == "inner_epochs") c.train.inner_epochs = static_cast<int>(config_int(key, v));
  else if (key == "lr_policy") c.train.lr_policy = config_real(key, v);
  else if (key == "lr_gnn") c.train.lr_gnn = config_real(key, v);
  else if (key == "ema_momentum") c.train.ema_momentum = config_real(key, v);
  else if (key == "lambda1") c.train.lambda1 = config_real(key, v);
  else if (key == "lambda2") c.train.lambda2 = config_real(key, v);
  else if (key == "weight_decay") c.train.weight_decay = config_real(key, v);
  else if (key == "early_stop_patience") c.train.early_stop_patience = static_cast<int>(config_int(key, v));
  else if (key == "policy_temperature") c.train.policy_temperature = config_real(key, v);
  else if (key == "seed") c.set_seed(static_cast<std::uint64_t>(config_count(key, v)));
  else if (key == "hops") c.sampling.hops = static_cast<int>(config_int(key, v));
  else if (key == "neighbors_per_hop") c.sampling.neighbors_per_hop = static_cast<int>(config_int(key, v));
  else if (key == "budget") c.sampling.budget = config_count(key, v);
  else if (key == "beta") c.sampling.beta = config_real(key, v);
  else if (key == "train_ratio") c.ratios.train = config_real(key, v);
  else if (key == "val_ratio") c.ratios.val = config_real(key, v);
  else if (key == "test_ratio") c.ratios.test = config_real(key, v);
  else if (key == "embed_dim") c.embed_dim = config_count(key, v);
  else if (key == "embed_seed") c.embed_seed = config_count(key, v);
  else if (key == "hidden") c.hidden = config_count(key, v);
  else if (key == "max_partner_rows") c.max_partner_rows = config_count(key, v);
  else if (key == "max_in_flight") c.max_in_flight = static_cast<unsigned>(config_count(key, v));
  else if (key == "threshold") c.threshold = config_real(key, v);
  else if (key == "model") c.model = v;
  else if (key == "remote_url") c.remote_url = v;
  else if (key == "remote_timeout_seconds") c.remote_timeout_seconds = static_cast<int>(config_int(key, v));
  else if (key == "remote_max_retries") c.remote_max_retries = static_cast<int>(config_int(key, v));
  else if (key == "n_accounts") c.synth.n_accounts = config_count(key, v);
  else if (key == "fraud_ratio") c.synth.fraud_ratio = config_real(key, v);
  else if (key == "fan_width") c.synth.fan_width = config_count(key, v);
  else if (key == "benign_hub_ratio") c.synth.benign_hub_ratio = config_real(key, v);
  else if (key == "burst_size") c.synth.burst_size = config_count(key, v);
  else if (key == "motif_fan_in") c.synth.motif_mix[0] = config_real(key, v);
  else if (key == "motif_fan_out") c.synth.motif_mix[1] = config_real(key, v);
  else if (key == "motif_relay") c.synth.motif_mix[2] = config_real(key, v);
  else if (key == "motif_burst") c.synth.motif_mix[3] = config_real(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

inline PipelineConfig parse_config(std::string_view text, PipelineConfig c = {}) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(t.substr(0, eq)), val = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    apply_config_value(c, key, val);
  }
  return c;
}

inline void validate(const PipelineConfig& c) {
  c.train.validate();
  c.sampling.validate();
  if (c.embed_dim == 0 || c.hidden == 0) throw ConfigError("embed_dim and hidden must be positive");
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  if (c.max_partner_rows == 0) throw ConfigError("max_partner_rows must be positive");
}

// ---------------------------------------------------------------------------
// Splits file: {"train": [accounts], "val": [...], "test": [...]}
// ---------------------------------------------------------------------------

inline nlohmann::json splits_to_json(const DatasetSplits& s, const TransactionGraph& g) {
  auto names = [&](const std::vector<NodeId>& v) {
    std::vector<std::string> out;
    for (NodeId n : v) out.push_back(g.name(n));
    return out;
  };
  return {{"train", names(s.train)}, {"val", names(s.val)}, {"test", names(s.test)}};
}

inline DatasetSplits splits_from_json(const nlohmann::json& j, const TransactionGraph& g) {
  auto ids = [&](const char* k) {
    std::vector<NodeId> out;
    try {
      for (const auto& a : j.at(k)) out.push_back(g.id(a.get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed splits file: ") + e.what());
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  return {ids("train"), ids("val"), ids("test")};
}

inline std::vector<LabeledNode> labeled_nodes(const TransactionGraph& g) {
  std::vector<LabeledNode> out;
  for (NodeId v : g.labeled_nodes()) out.push_back({v, static_cast<int>(g.label(v))});
  return out;
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

// Union of node sets, sorted.
inline std::vector<NodeId> covered_nodes(const std::vector<Subgraph>& subs) {
  std::set<NodeId> s;
  for (const auto& sub : subs) s.insert(sub.nodes.begin(), sub.nodes.end());
  return {s.begin(), s.end()};
}

inline std::vector<ForensicPrompt> build_prompts(const TransactionGraph& g, const std::vector<NodeId>& nodes,
                                                 const PromptOptions& opt,
                                                 const RedactionPolicy& redaction = RedactionPolicy{}) {
  std::vector<ForensicPrompt> out;
  out.reserve(nodes.size());
  for (NodeId v : nodes) out.push_back(build_forensic_prompt(build_dossier(g, v), opt, redaction));
  return out;
}

inline std::vector<TransactionSummary> summarize_nodes(const TransactionGraph& g, const std::vector<NodeId>& nodes,
                                                       Summarizer& backend, EvidenceStore& store,
                                                       const PipelineConfig& cfg, Clock clock) {
  auto prompts = build_prompts(g, nodes, cfg.prompt_options());
  std::vector<std::string> accounts;
  for (NodeId v : nodes) accounts.push_back(g.name(v));
  SummarizeOptions opt;
  opt.model = cfg.model;
  opt.clock = std::move(clock);
  return summarize_accounts(prompts, accounts, backend, store, cfg.max_in_flight, opt);
}

// Loads the cached summary of every node by recomputing its prompt key.
inline SummaryCorpus corpus_from_store(const TransactionGraph& g, const std::vector<NodeId>& nodes,
                                       const EvidenceStore& store, const PipelineConfig& cfg) {
  SummaryCorpus corpus(TextEmbedder(cfg.embed_dim, cfg.embed_seed));
  std::vector<std::string> missing;
  const auto prompts = build_prompts(g, nodes, cfg.prompt_options());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto rec = store.find(prompts[i].cache_key);
    if (!rec) {
      missing.push_back(g.name(nodes[i]));
      continue;
    }
    corpus.add(nodes[i], rec->sentences);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 5) list += ", ...";
    throw DataError(std::to_string(missing.size()) + " node(s) have no cached summary: " + list);
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Samples, training and scoring
// ---------------------------------------------------------------------------

using SubgraphIndex = std::map<NodeId, Subgraph>;

inline SubgraphIndex index_subgraphs(std::vector<Subgraph> subs) {
  SubgraphIndex idx;
  for (auto& s : subs) {
    NodeId c = s.center;
    idx.insert_or_assign(c, std::move(s));
  }
  return idx;
}

inline std::vector<TrainingSample> make_samples(const TransactionGraph& g, const std::vector<NodeId>& centers,
                                                const SubgraphIndex& subs) {
  std::vector<TrainingSample> out;
  out.reserve(centers.size());
  for (NodeId c : centers) {
    auto it = subs.find(c);
    if (it == subs.end()) throw DataError("no subgraph for account '" + g.name(c) + "'");
    const Label l = g.label(c);
    if (l == Label::unlabeled) throw DataError("account '" + g.name(c) + "' is unlabeled");
    out.push_back(make_sample(it->second, static_cast<int>(l)));
  }
  return out;
}

inline std::vector<const TrainingSample*> pointers(const std::vector<TrainingSample>& v) {
  std::vector<const TrainingSample*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

inline ScoreSet score_samples(const TransactionGraph& g, const std::vector<TrainingSample>& samples,
                              const SummaryCorpus& corpus, const DualPathParams& params, const SplitPolicy& policy,
                              double threshold) {
  auto ptrs = pointers(samples);
  auto views = deterministic_views(ptrs, corpus, policy);
  auto probs = predict_samples(ptrs, views, params, corpus);
  ScoreSet set;
  set.threshold = threshold;
  for (std::size_t i = 0; i < samples.size(); ++i) set.scores.push_back({g.name(samples[i].center), samples[i].label, probs[i]});
  return set;
}

// Checkpoint file: encoder parameters, split policy and the epoch they came from.
inline nlohmann::json checkpoint_to_json(const DualPathParams& p, const SplitPolicy& policy, int outer, int inner,
                                         double val_f1, std::size_t embed_dim) {
  return {{"format", "fraudgraph.checkpoint"}, {"version", 1},        {"outer", outer},
          {"inner", inner},                    {"val_f1", val_f1},    {"embed_dim", embed_dim},
          {"params", params_to_json(p)},       {"policy", policy_to_json(policy)}};
}

struct Checkpoint {
  DualPathParams params;
  SplitPolicy policy;
  std::size_t embed_dim = 0;
};

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "fraudgraph.checkpoint") throw DataError("not a checkpoint file");
    Checkpoint c;
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.params = params_from_json(j.at("params"), c.embed_dim);
    c.policy = policy_from_json(j.at("policy"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

struct ExperimentResult {
  DatasetSplits splits;
  TrainResult train;
  ScoreSet test_scores;
  EvalReport report;
};

// In-process equivalent of split -> subgraphs -> summarize -> train -> infer ->
// eval over a labelled graph.
inline ExperimentResult run_experiment(const TransactionGraph& g, const PipelineConfig& cfg, Summarizer& backend,
                                       EvidenceStore& store, const Clock& clock, const TrainHooks& hooks = {}) {
  validate(cfg);
  ExperimentResult r;
  auto labeled = labeled_nodes(g);
  r.splits = split_dataset(std::span<const LabeledNode>(labeled), cfg.ratios, cfg.seed());
  std::vector<NodeId> centers;
  for (const auto& ln : labeled) centers.push_back(ln.node);
  auto subs = index_subgraphs(build_subgraphs(g, centers, cfg.sampling));
  std::vector<Subgraph> all;
  for (const auto& [_, s] : subs) all.push_back(s);
  const auto nodes = covered_nodes(all);
  summarize_nodes(g, nodes, backend, store, cfg, clock);
  SummaryCorpus corpus = corpus_from_store(g, nodes, store, cfg);

  auto train = make_samples(g, r.splits.train, subs);
  auto val = make_samples(g, r.splits.val, subs);
  auto test = make_samples(g, r.splits.test, subs);
  TrainHooks h = hooks;
  if (!h.clock) h.clock = clock;
  r.train = alternate_train(pointers(train), pointers(val), corpus, cfg.train,
                            init_params(cfg.embed_dim, cfg.seed(), cfg.hidden), h);
  r.test_scores = score_samples(g, test, corpus, r.train.best_params, r.train.best_policy, cfg.threshold);
  r.report = compute_metrics(r.test_scores);
  return r;
}

}  // namespace fraudgraph
