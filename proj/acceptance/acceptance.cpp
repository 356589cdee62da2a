// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fraudgraph/pipeline.hpp"

using namespace fraudgraph;

namespace {

using Steady = std::chrono::steady_clock;

double seconds_since(Steady::time_point t0) {
  return std::chrono::duration<double>(Steady::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

RawTransaction make_tx(const std::string& id, const std::string& from, const std::string& to, double amount,
                       std::int64_t ts) {
  RawTransaction t;
  t.chain = Chain::generic;
  t.tx_id = id;
  t.from_account = from;
  t.to_account = to;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8f", amount);
  t.amount = Amount::parse(buf, 8);
  t.timestamp = ts;
  return t;
}

std::string node_name(std::size_t i) {
  char b[16];
  std::snprintf(b, sizeof b, "v%03zu", i);
  return b;
}

// ---------------------------------------------------------------------------
// 1. SIGC property suite
// ---------------------------------------------------------------------------

// Undirected BFS distances over a subgraph's edge list, recomputed from scratch.
std::map<NodeId, int> oracle_hops(const Subgraph& s) {
  std::map<NodeId, std::vector<NodeId>> adj;
  for (NodeId v : s.nodes) adj[v];
  for (const auto& e : s.edges) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  std::map<NodeId, int> dist;
  std::queue<NodeId> q;
  dist[s.center] = 0;
  q.push(s.center);
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop();
    for (NodeId w : adj[u])
      if (!dist.count(w)) {
        dist[w] = dist[u] + 1;
        q.push(w);
      }
  }
  return dist;
}

Outcome criterion_sigc() {
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  for (int gi = 0; gi < 200; ++gi) {
    const std::size_t n = 2 + rng() % 199;
    const std::size_t m = n + rng() % (3 * n);
    std::vector<RawTransaction> txs;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t a = rng() % n, b = rng() % n;
      if (a == b) continue;
      const double amount = std::exp(uniform01(rng) * 8.0 - 4.0);
      txs.push_back(make_tx("t" + std::to_string(k), node_name(a), node_name(b), amount, static_cast<std::int64_t>(k)));
    }
    if (txs.empty()) txs.push_back(make_tx("t", node_name(0), node_name(1), 1.0, 0));
    auto g = ingest_records(txs, Chain::generic).graph;
    SamplingConfig cfg;
    cfg.hops = 1 + static_cast<int>(rng() % 3);
    cfg.neighbors_per_hop = 2 + static_cast<int>(rng() % 12);
    cfg.budget = 1 + rng() % 15;
    cfg.beta = uniform01(rng) * 4.0;
    const NodeId center = g.id(txs[rng() % txs.size()].from_account);

    const auto t0 = Steady::now();
    Subgraph sampled = sample_khop(g, center, cfg);
    Subgraph comp = compress_sigc(sampled, cfg);
    Subgraph again = compress_sigc(comp, cfg);
    const double dt = seconds_since(t0);
    worst = std::max(worst, dt);
    auto fail = [&](const std::string& why) {
      return Outcome{false, "graph " + std::to_string(gi) + ": " + why};
    };
    if (dt >= 1.0) return fail("took " + std::to_string(dt) + " s");
    if (!(again == comp)) return fail("not idempotent");
    if (comp.nodes.empty() || comp.nodes[0] != center) return fail("center missing");

    // Exhaustive recomputation of every neighbour's importance on the input.
    auto hops_in = oracle_hops(sampled);
    std::map<NodeId, double> ain, aout;
    std::map<NodeId, std::size_t> din, dout;
    for (const auto& e : sampled.edges) {
      const double a = e.cum_amount.to_native(sampled.decimals);
      aout[e.src] += a;
      ain[e.dst] += a;
      ++dout[e.src];
      ++din[e.dst];
    }
    struct Scored {
      NodeId v;
      double s, flow;
    };
    std::vector<Scored> all;
    for (NodeId v : sampled.nodes) {
      if (v == center) continue;
      const double s = (std::log(ain[v] + aout[v] + 1.0) + cfg.beta * std::log(double(din[v] + dout[v]) + 1.0)) /
                       (hops_in.at(v) + 1.0);
      all.push_back({v, s, ain[v] + aout[v]});
    }
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
      if (a.s != b.s) return a.s > b.s;
      if (a.flow != b.flow) return a.flow > b.flow;
      return a.v < b.v;
    });
    std::set<NodeId> kept(comp.nodes.begin(), comp.nodes.end());
    if (sampled.nodes.size() > cfg.budget) {
      const std::size_t top = std::min(cfg.budget, all.size());
      const double cutoff = all[top - 1].s;
      for (std::size_t r = 0; r < top; ++r) {
        // Nodes tied with the cutoff within rounding may legitimately swap.
        if (std::abs(all[r].s - cutoff) <= 1e-12 * std::max(1.0, std::abs(cutoff)) && r + 1 < all.size() &&
            std::abs(all[top].s - cutoff) <= 1e-12 * std::max(1.0, std::abs(cutoff)))
          continue;
        if (!kept.count(all[r].v)) return fail("top-N_c node " + g.name(all[r].v) + " dropped");
      }
    } else if (!(comp == sampled)) {
      return fail("subgraph within budget was modified");
    }
    auto hops_out = oracle_hops(comp);
    if (hops_out.size() != comp.nodes.size()) return fail("compressed subgraph is disconnected");
    for (NodeId v : comp.nodes) {
      if (!kept.count(v) || !hops_in.count(v)) return fail("node outside the sampled subgraph");
      if (hops_out.at(v) != hops_in.at(v)) return fail("shortest path to " + g.name(v) + " not preserved");
      if (comp.hop_of(v) != hops_out.at(v)) return fail("stored hop disagrees with BFS");
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "200 graphs, slowest %.4f s", worst);
  return {true, buf};
}

// ---------------------------------------------------------------------------
// 2. Importance oracle
// ---------------------------------------------------------------------------

Outcome criterion_importance() {
  std::mt19937_64 rng(2002);
  double worst = 0.0;
  bool zero_exact = true;
  for (int i = 0; i < 1000; ++i) {
    FlowStats f;
    const bool zero = i % 50 == 0;
    if (!zero) {
      f.amount_in = rng() % 4 == 0 ? 0.0 : std::exp(uniform01(rng) * 20.0 - 8.0);
      f.amount_out = rng() % 4 == 0 ? 0.0 : std::exp(uniform01(rng) * 20.0 - 8.0);
      f.degree_in = rng() % 200;
      f.degree_out = rng() % 200;
    }
    f.hop = 1 + static_cast<int>(rng() % 5);
    const double beta = uniform01(rng) * 5.0;
    const double got = structural_importance(f, beta);
    if (zero) {
      zero_exact = zero_exact && got == 0.0;
      continue;
    }
    const double a = f.amount_in + f.amount_out;
    const double d = static_cast<double>(f.degree_in + f.degree_out);
    const double want = (std::log1p(a) + beta * std::log1p(d)) / (1.0 + f.hop);
    worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "1000 tuples, max error %.3g, all-zero case exact: %s", worst, zero_exact ? "yes" : "no");
  return {worst <= 1e-12 && zero_exact, buf};
}

// ---------------------------------------------------------------------------
// 3. Gradient check
// ---------------------------------------------------------------------------

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(r, c);
  for (double& x : m.data()) x = nd(rng);
  return m;
}

Matrix random_normalized_adjacency(std::size_t n, std::mt19937_64& rng) {
  Matrix a = Matrix::identity(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (uniform01(rng) < 0.3) a(i, j) = a(j, i) = 1.0;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) /= std::sqrt(deg[i] * deg[j]);
  return a;
}

Outcome criterion_gradcheck() {
  std::mt19937_64 rng(3003);
  const std::size_t hidden = 16;
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t checked = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n = 2 + rng() % 19, d = 2 + rng() % 15;
    DualPathParams p(d, hidden);
    p.visit([&](const std::string&, Matrix& m) { m = random_matrix(m.rows(), m.cols(), rng, 0.3); });
    SampleFeatures x{random_matrix(n, d, rng, 1.0), random_matrix(n, d, rng, 1.0), random_matrix(n, d, rng, 1.0)};
    Matrix a = random_normalized_adjacency(n, rng);
    const std::size_t c = rng() % n;
    const int label = static_cast<int>(rng() % 2);
    LossWeights w;
    auto fs = forward_sample(x, a, c, p, label, w);
    auto grad = p.zeros_like();
    backward_sample(x, a, c, p, label, w, fs, grad);
    auto ga = grad.blocks();
    auto pb = p.blocks();
    for (std::size_t b = 0; b < pb.size(); ++b) {
      for (std::size_t k = 0; k < pb[b].size(); ++k) {
        const double keep = pb[b][k];
        pb[b][k] = keep + h;
        const double up = forward_sample(x, a, c, p, label, w).loss.total;
        pb[b][k] = keep - h;
        const double dn = forward_sample(x, a, c, p, label, w).loss.total;
        pb[b][k] = keep;
        const double num = (up - dn) / (2.0 * h);
        const double rel = std::abs(num - ga[b][k]) / std::max({std::abs(num), std::abs(ga[b][k]), 1e-6});
        worst = std::max(worst, rel);
        ++checked;
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "20 instances, %zu coordinates, max relative error %.3g", checked, worst);
  return {worst <= 1e-4, buf};
}

// ---------------------------------------------------------------------------
// 4. REINFORCE unbiasedness and 5. Stage-1 learning signal share a toy world
// ---------------------------------------------------------------------------

struct ToyWorld {
  TransactionGraph g;
  SummaryCorpus corpus{TextEmbedder(16, 11)};
  std::vector<TrainingSample> samples;
};

// Exact expected reward of one sample's center split, and its gradient,
// by enumerating every Bernoulli draw.
struct Exact {
  double expected_reward = 0.0;
  std::vector<double> gradient;
};

double reward_for_draw(const TrainingSample& s, const SummaryCorpus& corpus, const ViewTable& views,
                       const SplitPolicy& policy, const DualPathParams& params, const LossWeights& w,
                       const std::vector<bool>& draw, const std::vector<double>& probs) {
  const auto& t = corpus.at(s.center);
  SummarySplit split;
  split.probabilities = probs;
  split.selections = draw;
  if (std::none_of(draw.begin(), draw.end(), [](bool b) { return b; }))
    split.selections[std::max_element(probs.begin(), probs.end()) - probs.begin()] = true;
  render_split_texts(split, t.sentences);
  SplitViews cv = embed_split(split, corpus.embedder());
  auto x = assemble_features(s, corpus, views, &cv);
  (void)policy;
  return reward_from_loss(forward_sample(x, s.adjacency, center_row(s), params, s.label, w).loss.total);
}

Exact exact_policy_gradient(const TrainingSample& s, const SummaryCorpus& corpus, const ViewTable& views,
                            const SplitPolicy& policy, const DualPathParams& params, const LossWeights& w) {
  const auto& t = corpus.at(s.center);
  const std::size_t n = t.sentences.size();
  auto probs = policy.probabilities(t.policy_features);
  Exact e;
  e.gradient.assign(policy.parameter_count(), 0.0);
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::vector<bool> draw(n);
    double pr = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      draw[i] = (mask >> i) & 1;
      pr *= draw[i] ? probs[i] : 1.0 - probs[i];
    }
    const double r = reward_for_draw(s, corpus, views, policy, params, w, draw, probs);
    e.expected_reward += pr * r;
    SummarySplit tmp;
    tmp.selections = draw;
    tmp.actions = draw;
    tmp.probabilities = probs;
    auto gl = split_log_prob_gradient(tmp, t.policy_features, policy);
    for (std::size_t k = 0; k < gl.size(); ++k) e.gradient[k] += pr * r * gl[k];
  }
  return e;
}

Outcome criterion_reinforce() {
  ToyWorld w;
  std::vector<RawTransaction> txs{make_tx("1", "center", "n1", 2.0, 0), make_tx("2", "n2", "center", 1.0, 5)};
  w.g = ingest_records(txs, Chain::generic).graph;
  w.corpus.add(w.g.id("center"), {"A burst of 14 transfers occurred within 2 hours.",
                                  "Funds were routed through a mixer service.",
                                  "The account shows significant net outflow dominance.",
                                  "Transactions appear to occur mostly during business hours.",
                                  "Total gas expenditure amounted to 0.002 units.",
                                  "Transfer amounts remained small and stable over the observed period."});
  w.corpus.add(w.g.id("n1"), {"The account executed 2 transactions.", "Funds were collected from 9 sources."});
  w.corpus.add(w.g.id("n2"), {"Transfer amounts remained stable.", "Activity spanned 40 days."});
  auto sub = sample_khop(w.g, w.g.id("center"), SamplingConfig{});
  w.samples.push_back(make_sample(sub, 1));
  const TrainingSample& s = w.samples[0];

  std::mt19937_64 rng(4004);
  SplitPolicy policy;
  std::normal_distribution<double> nd(0.0, 0.6);
  for (double& x : policy.weights) x = nd(rng);
  policy.bias = nd(rng);
  DualPathParams params(16, 8);
  params.visit([&](const std::string&, Matrix& m) { m = random_matrix(m.rows(), m.cols(), rng, 0.4); });
  const LossWeights lw;
  std::vector<const TrainingSample*> ptrs{&s};
  const ViewTable views = deterministic_views(ptrs, w.corpus, policy);
  const auto exact = exact_policy_gradient(s, w.corpus, views, policy, params, lw);

  const auto& t = w.corpus.at(s.center);
  const std::size_t dim = policy.parameter_count();
  const int N = 20000;
  std::vector<double> sum(dim, 0.0), sq(dim, 0.0), sum_b(dim, 0.0), sq_b(dim, 0.0);
  BaselineState baseline;
  baseline.momentum = 0.9;
  for (int i = 0; i < N; ++i) {
    auto split = split_summary(t.sentences, t.policy_features, policy, SplitMode::sample, &rng);
    SplitViews cv = embed_split(split, w.corpus.embedder());
    auto x = assemble_features(s, w.corpus, views, &cv);
    const double r = reward_from_loss(forward_sample(x, s.adjacency, center_row(s), params, s.label, lw).loss.total);
    const double adv = baseline.advantage(r);
    baseline = update_baseline(baseline, r);
    auto gl = split_log_prob_gradient(split, t.policy_features, policy);
    for (std::size_t k = 0; k < dim; ++k) {
      const double g0 = r * gl[k], gb = adv * gl[k];
      sum[k] += g0;
      sq[k] += g0 * g0;
      sum_b[k] += gb;
      sq_b[k] += gb * gb;
    }
  }
  double worst_z = 0.0;
  std::size_t active = 0;
  bool variance_ok = true;
  for (std::size_t k = 0; k < dim; ++k) {
    const double mean = sum[k] / N;
    const double var = sq[k] / N - mean * mean;
    const double mean_b = sum_b[k] / N;
    const double var_b = sq_b[k] / N - mean_b * mean_b;
    if (var <= 1e-300) {
      if (std::abs(mean - exact.gradient[k]) > 1e-12) return {false, "zero-variance coordinate mismatch"};
      continue;
    }
    ++active;
    const double se = std::sqrt(var / N);
    worst_z = std::max(worst_z, std::abs(mean - exact.gradient[k]) / se);
    variance_ok = variance_ok && var_b < var;
  }
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "%zu active coordinates, max |MC - exact| = %.2f SE (limit 3), baseline lowers variance on all: %s",
                active, worst_z, variance_ok ? "yes" : "no");
  return {worst_z <= 3.0 && variance_ok, buf};
}

Outcome criterion_stage1_signal() {
  // 20 labelled accounts, each paired with a neutral partner. Only fraud
  // summaries mention a mixer.
  ToyWorld w;
  std::vector<RawTransaction> txs;
  for (int i = 0; i < 20; ++i)
    txs.push_back(make_tx("t" + std::to_string(i), "acct" + std::to_string(i), "peer" + std::to_string(i), 1.0 + i, i));
  w.g = ingest_records(txs, Chain::generic).graph;
  const std::vector<std::string> neutral = {"The account executed 5 transactions over 30 days.",
                                            "Total inflow was 1.0 units and total outflow was 1.0 units."};
  for (int i = 0; i < 20; ++i) {
    const bool fraud = i % 2 == 0;
    auto sents = neutral;
    if (fraud) sents.insert(sents.begin() + (i % 3 == 0 ? 0 : 1), "Funds were routed through a mixer.");
    else sents.push_back("Transfer amounts remained small.");
    w.corpus.add(w.g.id("acct" + std::to_string(i)), sents);
    w.corpus.add(w.g.id("peer" + std::to_string(i)), {"The partner account shows routine activity."});
    w.samples.push_back(make_sample(sample_khop(w.g, w.g.id("acct" + std::to_string(i)), SamplingConfig{}), fraud));
  }
  auto ptrs = pointers(w.samples);

  TrainConfig cfg;
  cfg.lr_policy = 0.05;
  cfg.lr_gnn = 1e-2;
  SplitPolicy init;
  // Pre-train the encoder under the initial policy so rewards carry signal.
  DualPathParams params = init_params(16, 5, 16);
  {
    AdamW opt({cfg.lr_gnn, 0.9, 0.999, 1e-8, 0.0});
    auto views = deterministic_views(ptrs, w.corpus, init);
    std::mt19937_64 rng(5);
    for (int e = 0; e < 40; ++e) stage2_epoch(ptrs, views, params, opt, w.corpus, cfg, rng);
  }

  const std::size_t kw = keyword_feature_index("mixer");
  auto expected_reward = [&](const SplitPolicy& pol) {
    auto views = deterministic_views(ptrs, w.corpus, pol);
    double total = 0.0;
    for (const auto* s : ptrs) total += exact_policy_gradient(*s, w.corpus, views, pol, params, cfg.loss_weights()).expected_reward;
    return total / static_cast<double>(ptrs.size());
  };

  PolicyTrainer pt = make_policy_trainer(cfg, init);
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> curve{expected_reward(pt.policy)};
  std::size_t steps = 0;
  for (int epoch = 0; epoch < 10; ++epoch) {
    steps += stage1_epoch(ptrs, pt, params, w.corpus, cfg, rng).steps;
    curve.push_back(expected_reward(pt.policy));
  }
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 2 < curve.size(); ++i) smooth.push_back((curve[i] + curve[i + 1] + curve[i + 2]) / 3.0);
  bool monotone = true;
  for (std::size_t i = 1; i < smooth.size(); ++i) monotone = monotone && smooth[i] >= smooth[i - 1];
  const double w0 = init.weights[kw], w1 = pt.policy.weights[kw];
  char buf[220];
  std::snprintf(buf, sizeof buf,
                "%zu steps, keyword weight %.4f -> %.4f, expected reward %.4f -> %.4f, smoothed curve non-decreasing: %s",
                steps, w0, w1, curve.front(), curve.back(), monotone ? "yes" : "no");
  return {steps == 200 && w1 > w0 && monotone, buf};
}

// ---------------------------------------------------------------------------
// 6. End-to-end synthetic benchmark
// ---------------------------------------------------------------------------

Clock fixed_clock() {
  return [] { return std::int64_t{1700000000}; };
}

Outcome criterion_end_to_end() {
  const auto t0 = Steady::now();
  PipelineConfig cfg;  // defaults: 2,000 accounts, 10% fraud, published hyperparameters
  auto g = synth_graph(synthgen(cfg.synth));
  MockSummarizer mock;
  EvidenceStore store;
  auto r = run_experiment(g, cfg, mock, store, fixed_clock());
  const double dt = seconds_since(t0);
  const double auc = r.report.auc.value_or(0.0), ks = r.report.ks.value_or(0.0);
  char buf[200];
  std::snprintf(buf, sizeof buf, "test AUC %.4f (>= 0.90), KS %.4f (>= 0.60), F1 %.4f, %zu test accounts, %.1f s", auc,
                ks, r.report.f1.value_or(0.0), r.test_scores.scores.size(), dt);
  return {auc >= 0.90 && ks >= 0.60 && dt <= 600.0, buf};
}

// ---------------------------------------------------------------------------
// 7. Metric oracles
// ---------------------------------------------------------------------------

Outcome criterion_metrics() {
  std::mt19937_64 rng(7007);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> f(1 + rng() % 60), b(1 + rng() % 60);
    const bool coarse = rep % 2 == 0;
    for (auto* v : {&f, &b})
      for (double& x : *v) x = coarse ? static_cast<double>(rng() % 11) / 10.0 : uniform01(rng);
    double pairs = 0;
    for (double x : f)
      for (double y : b) pairs += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    const double auc = pairs / static_cast<double>(f.size() * b.size());
    std::vector<double> ts = f;
    ts.insert(ts.end(), b.begin(), b.end());
    double ks = 0;
    for (double t : ts) {
      double cf = 0, cb = 0;
      for (double x : f) cf += x <= t;
      for (double y : b) cb += y <= t;
      ks = std::max(ks, std::abs(cf / f.size() - cb / b.size()));
    }
    worst = std::max({worst, std::abs(auc_rank(f, b) - auc), std::abs(ks_statistic(f, b) - ks)});
  }
  const double example = ks_statistic({0.9, 0.8, 0.4}, {0.7, 0.3, 0.2});
  char buf[160];
  std::snprintf(buf, sizeof buf, "100 random sets, max deviation %.3g; worked KS example %.6f (2/3)", worst, example);
  return {worst <= 1e-12 && std::abs(example - 2.0 / 3.0) <= 1e-12, buf};
}

// ---------------------------------------------------------------------------
// 8. Freeze discipline and determinism
// ---------------------------------------------------------------------------

struct RunArtifacts {
  std::string log, checkpoint, report, scores;
  std::size_t policy_stages = 0, encoder_stages = 0;
  bool freeze_ok = true;
};

RunArtifacts pipeline_run(const PipelineConfig& cfg) {
  auto g = synth_graph(synthgen(cfg.synth));
  MockSummarizer mock;
  EvidenceStore store;
  RunArtifacts a;
  TrainHooks hooks;
  hooks.on_stage = [&](const std::string& stage, const std::string& pb, const std::string& pa, const std::string& qb,
                       const std::string& qa) {
    if (stage == "policy") {
      ++a.policy_stages;
      a.freeze_ok = a.freeze_ok && pb == pa;
    } else {
      ++a.encoder_stages;
      a.freeze_ok = a.freeze_ok && qb == qa;
    }
  };
  auto r = run_experiment(g, cfg, mock, store, fixed_clock(), hooks);
  a.log = r.train.log_jsonl();
  a.checkpoint = checkpoint_to_json(r.train.best_params, r.train.best_policy, r.train.best_outer, r.train.best_inner,
                                    r.train.best_val_f1, cfg.embed_dim)
                     .dump();
  a.report = report_to_csv(r.report);
  a.scores = scores_to_csv(r.test_scores);
  return a;
}

Outcome criterion_freeze_determinism() {
  PipelineConfig cfg;
  cfg.synth.n_accounts = 400;
  cfg.set_seed(23);
  cfg.train.lr_policy = 1e-2;  // make policy movement visible in digests
  cfg.train.early_stop_patience = 0;  // audit every stage of both outer epochs
  auto a = pipeline_run(cfg);
  auto b = pipeline_run(cfg);
  const bool same = a.log == b.log && a.checkpoint == b.checkpoint && a.report == b.report && a.scores == b.scores;
  char buf[220];
  std::snprintf(buf, sizeof buf,
                "%zu policy / %zu encoder stages audited, freeze held: %s; logs %s, checkpoints %s, reports %s",
                a.policy_stages, a.encoder_stages, a.freeze_ok && b.freeze_ok ? "yes" : "no",
                a.log == b.log ? "identical" : "differ", a.checkpoint == b.checkpoint ? "identical" : "differ",
                a.report == b.report && a.scores == b.scores ? "identical" : "differ");
  return {a.freeze_ok && b.freeze_ok && same && a.policy_stages > 0 && a.encoder_stages > 0, buf};
}

// ---------------------------------------------------------------------------
// 9. Redaction audit
// ---------------------------------------------------------------------------

Outcome criterion_redaction() {
  SynthConfig sc;
  sc.n_accounts = 500;
  sc.seed = 9;
  auto synth = synthgen(sc);
  auto g = synth_graph(synth);
  std::vector<NodeId> nodes;
  for (const auto& [acct, _] : synth.labels) nodes.push_back(g.id(acct));
  PipelineConfig cfg;
  auto prompts = build_prompts(g, nodes, cfg.prompt_options());
  MockSummarizer mock;
  EvidenceStore store;
  summarize_nodes(g, nodes, mock, store, cfg, fixed_clock());

  RedactionPolicy scan;
  std::size_t hits = 0, scanned = 0;
  for (const auto& p : prompts) {
    ++scanned;
    hits += !scan.find_violation(p.text).empty();
  }
  for (const auto& r : store.records()) {
    ++scanned;
    // The cache key is a content digest, not an identifier; hex digests can
    // collide with the base58 pattern, so it is not scanned.
    hits += !scan.find_violation(r.text + "\n" + r.account + "\n" + r.backend_tag).empty();
    for (const auto& s : r.sentences) hits += !scan.find_violation(s).empty();
  }
  // Positive control: the scanner recognises every raw identifier.
  std::size_t detected = 0;
  for (const auto& [acct, _] : synth.labels) detected += !scan.find_violation("x " + acct + " y").empty();
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu prompts + summaries scanned, %zu raw identifiers found; scanner detects %zu/%zu raw ids",
                scanned, hits, detected, synth.labels.size());
  return {hits == 0 && detected == synth.labels.size() && prompts.size() == 500, buf};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"SIGC property suite", criterion_sigc},
      {"structural importance oracle", criterion_importance},
      {"dual-path gradient check", criterion_gradcheck},
      {"REINFORCE unbiasedness and baseline variance", criterion_reinforce},
      {"Stage-1 learning signal", criterion_stage1_signal},
      {"end-to-end synthetic benchmark", criterion_end_to_end},
      {"metric oracles", criterion_metrics},
      {"freeze discipline and determinism", criterion_freeze_determinism},
      {"redaction audit", criterion_redaction},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Steady::now();
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %zu. %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
