#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fraudgraph/common.hpp"
#include "fraudgraph/matrix.hpp"
#include "fraudgraph/summary.hpp"

namespace fraudgraph {

// Sentence features: one indicator per keyword, then word count / 20 and the
// fraction of numeric tokens. The list is fixed so learned weights can be read
// off by keyword.
inline const std::vector<std::string>& policy_keywords() {
  static const std::vector<std::string> kw = {
      "amount", "value",  "funds",     "inflow",     "outflow", "dominance", "sources", "destinations",
      "fan-in", "fan-out", "relayed",  "burst",      "window",  "frequency", "rapid",   "mixer",
      "darknet", "laundering", "hours", "days",      "period",  "stable",    "appear",  "gas"};
  return kw;
}

inline std::size_t policy_feature_dim() { return policy_keywords().size() + 2; }

inline std::size_t keyword_feature_index(std::string_view keyword) {
  const auto& kw = policy_keywords();
  auto it = std::find(kw.begin(), kw.end(), keyword);
  if (it == kw.end()) throw NotFoundError("policy keyword '" + std::string(keyword) + "'");
  return static_cast<std::size_t>(it - kw.begin());
}

// Lower-cased alphanumeric tokens; hyphens inside words are kept ("fan-in").
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && cur.back() == '-') cur.pop_back();
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '-' && !cur.empty()) {
      cur.push_back('-');
    } else if (c == '.' && !cur.empty() && std::isdigit(static_cast<unsigned char>(cur.back()))) {
      cur.push_back('.');
    } else {
      flush();
    }
  }
  flush();
  for (auto& t : out)
    while (!t.empty() && t.back() == '.') t.pop_back();
  return out;
}

inline std::vector<double> sentence_features(std::string_view sentence) {
  const auto& kw = policy_keywords();
  std::vector<double> phi(policy_feature_dim(), 0.0);
  auto tokens = tokenize(sentence);
  std::size_t numerals = 0;
  for (const auto& t : tokens) {
    if (!t.empty() && std::isdigit(static_cast<unsigned char>(t[0]))) ++numerals;
    for (std::size_t k = 0; k < kw.size(); ++k) {
      if (t == kw[k] || t == kw[k] + "s" || t == kw[k] + "es") phi[k] = 1.0;
    }
  }
  phi[kw.size()] = static_cast<double>(tokens.size()) / 20.0;
  phi[kw.size() + 1] = tokens.empty() ? 0.0 : static_cast<double>(numerals) / static_cast<double>(tokens.size());
  return phi;
}

inline Matrix featurize(const std::vector<std::string>& sentences) {
  Matrix m(sentences.size(), policy_feature_dim());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto phi = sentence_features(sentences[i]);
    std::copy(phi.begin(), phi.end(), m.row(i).begin());
  }
  return m;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Trainable stand-in for the discriminative/residual analyst agents: each
// sentence joins the discriminative side independently with probability
// sigmoid((w . phi + b) / temperature).
struct SplitPolicy {
  std::vector<double> weights = std::vector<double>(policy_feature_dim(), 0.0);
  double bias = 0.0;
  double temperature = 1.0;

  std::size_t parameter_count() const { return weights.size() + 1; }

  // Flat view: weights followed by the bias.
  std::vector<double> flat() const {
    std::vector<double> v = weights;
    v.push_back(bias);
    return v;
  }
  void set_flat(std::span<const double> v) {
    if (v.size() != parameter_count()) throw ShapeError("split policy parameter vector has wrong length");
    std::copy(v.begin(), v.end() - 1, weights.begin());
    bias = v.back();
  }

  std::vector<double> probabilities(const Matrix& features) const {
    if (features.cols() != weights.size()) throw ShapeError("policy features have wrong width");
    if (!(temperature > 0.0)) throw ConfigError("policy temperature must be positive");
    std::vector<double> p(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) p[i] = sigmoid((dot(weights, features.row(i)) + bias) / temperature);
    return p;
  }

  std::string digest() const {
    std::string bytes(reinterpret_cast<const char*>(weights.data()), weights.size() * sizeof(double));
    bytes.append(reinterpret_cast<const char*>(&bias), sizeof bias);
    bytes.append(reinterpret_cast<const char*>(&temperature), sizeof temperature);
    return content_digest(bytes);
  }

  friend bool operator==(const SplitPolicy&, const SplitPolicy&) = default;
};

inline nlohmann::json policy_to_json(const SplitPolicy& p) {
  return {{"format", "fraudgraph.split_policy"},
          {"version", 1},
          {"keywords", policy_keywords()},
          {"weights", p.weights},
          {"bias", p.bias},
          {"temperature", p.temperature}};
}

inline SplitPolicy policy_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "fraudgraph.split_policy") throw DataError("not a split policy file");
    SplitPolicy p;
    auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != policy_feature_dim())
      throw ShapeError("split policy has " + std::to_string(w.size()) + " weights, expected " +
                       std::to_string(policy_feature_dim()));
    p.weights = std::move(w);
    p.bias = j.at("bias").get<double>();
    p.temperature = j.at("temperature").get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed split policy: ") + e.what());
  }
}

struct SummarySplit {
  std::string disc_text;
  std::string resi_text;
  std::vector<bool> selections;  // true: sentence is discriminative
  // The policy's own decisions, which log-probabilities and gradients refer
  // to. Equal to `selections` except after the empty-side fallback in sample
  // mode, where the fallback is treated as part of the environment.
  std::vector<bool> actions;
  std::vector<double> probabilities;
  double logp_disc = 0.0;
  double logp_resi = 0.0;
};

enum class SplitMode { sample, deterministic };

// Log-probabilities of the policy's decisions under per-sentence inclusion
// probabilities.
inline void assign_log_probs(SummarySplit& s) {
  if (s.actions.empty()) s.actions = s.selections;
  s.logp_disc = 0.0;
  s.logp_resi = 0.0;
  for (std::size_t i = 0; i < s.actions.size(); ++i) {
    if (s.actions[i]) s.logp_disc += std::log(s.probabilities[i]);
    else s.logp_resi += std::log1p(-s.probabilities[i]);
  }
}

inline void render_split_texts(SummarySplit& s, const std::vector<std::string>& sentences) {
  std::vector<std::string> d, r;
  for (std::size_t i = 0; i < sentences.size(); ++i) (s.selections[i] ? d : r).push_back(sentences[i]);
  s.disc_text = join_sentences(d);
  s.resi_text = join_sentences(r);
}

// Sample mode draws one Bernoulli per sentence; deterministic mode keeps
// sentences with p >= 0.5. An empty discriminative side is replaced by the
// single highest-probability sentence. In sample mode the log-probabilities
// stay those of the raw draws, which keeps the score-function estimator
// unbiased; in deterministic mode they describe the realized assignment.
template <typename Rng = std::mt19937_64>
SummarySplit split_summary(const std::vector<std::string>& sentences, const Matrix& features,
                           const SplitPolicy& policy, SplitMode mode, Rng* rng = nullptr) {
  if (sentences.empty()) throw DataError("cannot split an empty summary");
  if (features.rows() != sentences.size()) throw ShapeError("feature rows do not match sentence count");
  SummarySplit s;
  s.probabilities = policy.probabilities(features);
  s.selections.resize(sentences.size());
  if (mode == SplitMode::sample && rng == nullptr) throw ConfigError("sample mode needs a random engine");
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    s.selections[i] = mode == SplitMode::sample ? uniform01(*rng) < s.probabilities[i] : s.probabilities[i] >= 0.5;
  }
  if (std::none_of(s.selections.begin(), s.selections.end(), [](bool b) { return b; })) {
    if (mode == SplitMode::sample) s.actions = s.selections;
    auto best = std::max_element(s.probabilities.begin(), s.probabilities.end()) - s.probabilities.begin();
    s.selections[static_cast<std::size_t>(best)] = true;
  }
  assign_log_probs(s);
  render_split_texts(s, sentences);
  return s;
}

template <typename Rng = std::mt19937_64>
SummarySplit split_summary(const TransactionSummary& summary, const SplitPolicy& policy, SplitMode mode,
                           Rng* rng = nullptr) {
  return split_summary(summary.sentences, featurize(summary.sentences), policy, mode, rng);
}

// Gradient of (logp_disc + logp_resi) with respect to the flat policy
// parameters: sum_i (a_i - p_i) phi_i / T over the policy's actions a, with
// phi extended by 1 for the bias.
inline std::vector<double> split_log_prob_gradient(const SummarySplit& s, const Matrix& features,
                                                   const SplitPolicy& policy) {
  std::vector<double> g(policy.parameter_count(), 0.0);
  const auto& a = s.actions.empty() ? s.selections : s.actions;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double coef = ((a[i] ? 1.0 : 0.0) - s.probabilities[i]) / policy.temperature;
    auto phi = features.row(i);
    for (std::size_t k = 0; k < phi.size(); ++k) g[k] += coef * phi[k];
    g.back() += coef;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Free-form split through a remote LLM
// ---------------------------------------------------------------------------

inline constexpr const char* kSplitTemplateVersion = "split-v1";

inline std::string discriminative_split_prompt(const std::string& summary) {
  return std::string(
             "You are a blockchain fraud analyst. From the transaction summary below, extract only the sentences "
             "that carry fraud-relevant, discriminative evidence. Focus on four aspects:\n"
             "(1) Transaction patterns: high-frequency or dense transfers within short time intervals.\n"
             "(2) Fund flows: aggregation and dispersion, funds collected from multiple sources and moved through "
             "multi-hop paths to multiple destinations.\n"
             "(3) Associated addresses: interactions with high-risk entities such as mixers or darknet services.\n"
             "(4) Temporal signs: activity concentrated in specific high-risk periods.\n"
             "Copy the selected sentences verbatim. Do not add new facts.\n\n[SUMMARY]\n") +
         summary + "\n[END]\n";
}

inline std::string residual_split_prompt(const std::string& summary) {
  return std::string(
             "You are a blockchain fraud analyst. From the transaction summary below, extract only the sentences "
             "that are not useful for fraud identification. Focus on two aspects:\n"
             "(1) Noise extraction: prompt-like language, redundant descriptions, or subjective judgments without "
             "explicit transactional evidence.\n"
             "(2) Factual statements: plain descriptions of transaction data that carry no risk signal, such as "
             "the length of activity or stable volumes.\n"
             "Copy the selected sentences verbatim. Do not add new facts.\n\n[SUMMARY]\n") +
         summary + "\n[END]\n";
}

// Token-set overlap |A & B| / max(|A|, |B|).
inline double token_overlap(const std::string& a, const std::string& b) {
  auto ta = tokenize(a), tb = tokenize(b);
  std::set<std::string> sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
  if (sa.empty() || sb.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : sa) common += sb.count(t);
  return static_cast<double>(common) / static_cast<double>(std::max(sa.size(), sb.size()));
}

struct RemoteSplitOptions {
  std::string model = "summary-analyst";
  int max_tokens = 512;
  double coverage_threshold = 0.5;  // minimum overlap for a reply sentence to cover a source sentence
};

// Maps the two agents' free-form replies back onto source sentences. Each
// source sentence goes to the side whose reply covers it best (ties to the
// discriminative side); sentences neither side covers go to the residual
// side. Log-probabilities come from the backend when it reports token
// log-probabilities for both replies, otherwise from `surrogate`.
inline SummarySplit remote_llm_split(const TransactionSummary& summary, Summarizer& backend,
                                     const SplitPolicy* surrogate = nullptr, const RemoteSplitOptions& opt = {}) {
  if (summary.sentences.empty()) throw DataError("cannot split an empty summary");
  Completion disc = backend.complete({opt.model, discriminative_split_prompt(summary.text), opt.max_tokens, 0.0, true});
  Completion resi = backend.complete({opt.model, residual_split_prompt(summary.text), opt.max_tokens, 0.0, true});
  auto disc_s = segment_sentences(disc.text);
  auto resi_s = segment_sentences(resi.text);
  auto best = [&](const std::string& src, const std::vector<std::string>& reply) {
    double b = 0.0;
    for (const auto& r : reply) b = std::max(b, token_overlap(src, r));
    return b;
  };

  const std::size_t n = summary.sentences.size();
  SummarySplit s;
  s.selections.assign(n, false);
  std::vector<double> disc_score(n);
  bool covered_any = false;
  for (std::size_t i = 0; i < n; ++i) {
    disc_score[i] = best(summary.sentences[i], disc_s);
    const double r = best(summary.sentences[i], resi_s);
    const bool d_cov = disc_score[i] >= opt.coverage_threshold;
    const bool r_cov = r >= opt.coverage_threshold;
    covered_any = covered_any || d_cov || r_cov;
    s.selections[i] = d_cov && disc_score[i] >= r;
  }
  if (!covered_any) throw DataError("unusable split: agent replies cover no source sentence");
  if (std::none_of(s.selections.begin(), s.selections.end(), [](bool b) { return b; })) {
    s.selections[static_cast<std::size_t>(std::max_element(disc_score.begin(), disc_score.end()) - disc_score.begin())] =
        true;
  }
  render_split_texts(s, summary.sentences);

  if (disc.token_logprobs && resi.token_logprobs) {
    s.logp_disc = std::min(0.0, std::accumulate(disc.token_logprobs->begin(), disc.token_logprobs->end(), 0.0));
    s.logp_resi = std::min(0.0, std::accumulate(resi.token_logprobs->begin(), resi.token_logprobs->end(), 0.0));
  } else if (surrogate != nullptr) {
    s.probabilities = surrogate->probabilities(featurize(summary.sentences));
    assign_log_probs(s);
  } else {
    throw BackendError("backend reported no token log-probabilities and no surrogate policy is configured", 1);
  }
  return s;
}

}  // namespace fraudgraph
