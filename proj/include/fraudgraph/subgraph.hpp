#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "fraudgraph/common.hpp"
#include "fraudgraph/ingest.hpp"
#include "fraudgraph/matrix.hpp"

namespace fraudgraph {

struct SamplingConfig {
  int hops = 2;              // h
  int neighbors_per_hop = 10;  // K
  std::size_t budget = 10;   // N_c
  double beta = 2.0;

  void validate() const {
    if (hops < 1) throw ConfigError("hop count h must be >= 1");
    if (neighbors_per_hop < 1) throw ConfigError("neighbors per hop K must be >= 1");
    if (budget < 1) throw ConfigError("compression budget N_c must be >= 1");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be a finite non-negative real");
  }
};

// Account-centred neighbourhood. Node ids refer to the global graph; nodes[0]
// is always the center and hop[i] is the undirected BFS distance of nodes[i].
struct Subgraph {
  NodeId center = 0;
  std::vector<NodeId> nodes;
  std::vector<int> hop;
  std::vector<EdgeRecord> edges;  // induced edges, sorted by (src, dst)
  int decimals = 8;
  // Set once the subgraph has been through structural compression.
  std::optional<std::size_t> compressed_budget;

  std::size_t size() const { return nodes.size(); }

  std::optional<std::size_t> local_index(NodeId v) const {
    auto it = std::find(nodes.begin(), nodes.end(), v);
    if (it == nodes.end()) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
  }

  int hop_of(NodeId v) const {
    auto i = local_index(v);
    if (!i) throw NotFoundError("node " + std::to_string(v) + " is not in the subgraph");
    return hop[*i];
  }

  friend bool operator==(const Subgraph&, const Subgraph&) = default;
};

namespace detail {

// Undirected neighbour lists over local indices, each list ascending.
inline std::vector<std::vector<std::size_t>> undirected_local_adjacency(const Subgraph& sub) {
  std::unordered_map<NodeId, std::size_t> pos;
  for (std::size_t i = 0; i < sub.nodes.size(); ++i) pos.emplace(sub.nodes[i], i);
  std::vector<std::vector<std::size_t>> adj(sub.nodes.size());
  for (const auto& e : sub.edges) {
    std::size_t a = pos.at(e.src), b = pos.at(e.dst);
    if (a == b) continue;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& l : adj) {
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
  }
  return adj;
}

struct BfsResult {
  std::vector<int> dist;             // -1 when unreachable
  std::vector<std::ptrdiff_t> parent;  // -1 for the root / unreachable
};

inline BfsResult bfs_local(const std::vector<std::vector<std::size_t>>& adj, std::size_t root) {
  BfsResult r{std::vector<int>(adj.size(), -1), std::vector<std::ptrdiff_t>(adj.size(), -1)};
  std::deque<std::size_t> q{root};
  r.dist[root] = 0;
  while (!q.empty()) {
    std::size_t u = q.front();
    q.pop_front();
    for (std::size_t w : adj[u]) {
      if (r.dist[w] >= 0) continue;
      r.dist[w] = r.dist[u] + 1;
      r.parent[w] = static_cast<std::ptrdiff_t>(u);
      q.push_back(w);
    }
  }
  return r;
}

inline std::vector<EdgeRecord> induced_edges(const TransactionGraph& g, const std::vector<NodeId>& nodes) {
  std::unordered_set<NodeId> in(nodes.begin(), nodes.end());
  std::vector<EdgeRecord> out;
  for (NodeId u : nodes)
    for (std::size_t e : g.out_edges(u))
      if (in.count(g.edge(e).dst)) out.push_back(g.edge(e));
  std::sort(out.begin(), out.end(),
            [](const EdgeRecord& a, const EdgeRecord& b) { return std::pair(a.src, a.dst) < std::pair(b.src, b.dst); });
  return out;
}

inline void assign_bfs_hops(Subgraph& sub) {
  auto adj = undirected_local_adjacency(sub);
  auto bfs = bfs_local(adj, 0);
  for (int d : bfs.dist)
    if (d < 0) throw DataError("subgraph is not connected to its center");
  sub.hop = std::move(bfs.dist);
}

}  // namespace detail

// Candidate interaction statistics between v and a neighbour u, summed over
// both transfer directions.
struct Interaction {
  NodeId node = 0;
  Amount total;
  std::uint64_t count = 0;
};

// a ranks before b: higher average amount, then higher total, then smaller id
// (ids follow lexicographic account order). Averages compare exactly via
// cross-multiplication in base units.
inline bool interaction_ranks_before(const Interaction& a, const Interaction& b) {
  const Amount::Rep lhs = a.total.base() * static_cast<Amount::Rep>(b.count);
  const Amount::Rep rhs = b.total.base() * static_cast<Amount::Rep>(a.count);
  if (lhs != rhs) return lhs > rhs;
  if (a.total != b.total) return a.total > b.total;
  return a.node < b.node;
}

inline std::vector<Interaction> interactions(const TransactionGraph& g, NodeId v) {
  std::map<NodeId, Interaction> acc;
  auto add = [&](NodeId u, const EdgeRecord& e) {
    if (u == v) return;
    auto& it = acc[u];
    it.node = u;
    it.total += e.cum_amount;
    it.count += e.tx_count;
  };
  for (std::size_t e : g.out_edges(v)) add(g.edge(e).dst, g.edge(e));
  for (std::size_t e : g.in_edges(v)) add(g.edge(e).src, g.edge(e));
  std::vector<Interaction> out;
  out.reserve(acc.size());
  for (auto& [_, i] : acc) out.push_back(i);
  return out;
}

// Value-guided h-hop sampling: each frontier node contributes its top-K
// not-yet-selected neighbours by average interaction amount.
inline Subgraph sample_khop(const TransactionGraph& g, NodeId center, const SamplingConfig& cfg) {
  cfg.validate();
  if (center >= g.node_count()) throw NotFoundError("center node " + std::to_string(center) + " is not in the graph");
  Subgraph sub;
  sub.center = center;
  sub.decimals = g.decimals();
  sub.nodes.push_back(center);
  std::unordered_set<NodeId> selected{center};
  std::vector<NodeId> frontier{center};
  for (int k = 1; k <= cfg.hops && !frontier.empty(); ++k) {
    std::vector<NodeId> next;
    for (NodeId v : frontier) {
      auto cands = interactions(g, v);
      std::erase_if(cands, [&](const Interaction& c) { return selected.count(c.node) > 0; });
      std::sort(cands.begin(), cands.end(), interaction_ranks_before);
      const std::size_t take = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(cfg.neighbors_per_hop));
      for (std::size_t i = 0; i < take; ++i) {
        selected.insert(cands[i].node);
        sub.nodes.push_back(cands[i].node);
        next.push_back(cands[i].node);
      }
    }
    frontier = std::move(next);
  }
  sub.edges = detail::induced_edges(g, sub.nodes);
  detail::assign_bfs_hops(sub);
  return sub;
}

inline Subgraph sample_khop(const TransactionGraph& g, std::string_view center, const SamplingConfig& cfg) {
  return sample_khop(g, g.id(center), cfg);
}

// Inputs of the structural importance score of one neighbour.
struct FlowStats {
  double amount_in = 0.0;
  double amount_out = 0.0;
  std::size_t degree_in = 0;
  std::size_t degree_out = 0;
  int hop = 0;
};

inline double structural_importance(const FlowStats& f, double beta) {
  const double value_term = std::log(f.amount_in + f.amount_out + 1.0);
  const double degree_term = std::log(static_cast<double>(f.degree_in + f.degree_out) + 1.0);
  return (value_term + beta * degree_term) / (static_cast<double>(f.hop) + 1.0);
}

// Flow statistics of every node within the subgraph, aligned with sub.nodes.
inline std::vector<FlowStats> subgraph_flows(const Subgraph& sub) {
  std::unordered_map<NodeId, std::size_t> pos;
  for (std::size_t i = 0; i < sub.nodes.size(); ++i) pos.emplace(sub.nodes[i], i);
  std::vector<FlowStats> flows(sub.nodes.size());
  for (const auto& e : sub.edges) {
    const double a = e.cum_amount.to_native(sub.decimals);
    auto& s = flows[pos.at(e.src)];
    auto& d = flows[pos.at(e.dst)];
    s.amount_out += a;
    s.degree_out += 1;
    d.amount_in += a;
    d.degree_in += 1;
  }
  for (std::size_t i = 0; i < flows.size(); ++i) flows[i].hop = sub.hop[i];
  return flows;
}

// Amounts are taken in native units (ether, bitcoin) and the log is natural.
inline double structural_importance(const Subgraph& sub, NodeId u, double beta) {
  if (u == sub.center) throw DomainError("structural importance is defined for neighbours, not the center");
  auto idx = sub.local_index(u);
  if (!idx) throw NotFoundError("node " + std::to_string(u) + " is not in the subgraph");
  return structural_importance(subgraph_flows(sub)[*idx], beta);
}

struct RankedNeighbor {
  std::size_t local = 0;
  double score = 0.0;
  double flow = 0.0;
  NodeId node = 0;
};

// Neighbours ordered by descending importance; ties by larger total flow,
// then by smaller node id.
inline std::vector<RankedNeighbor> rank_by_importance(const Subgraph& sub, double beta) {
  auto flows = subgraph_flows(sub);
  std::vector<RankedNeighbor> ranked;
  for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
    if (sub.nodes[i] == sub.center) continue;
    ranked.push_back({i, structural_importance(flows[i], beta), flows[i].amount_in + flows[i].amount_out, sub.nodes[i]});
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedNeighbor& a, const RankedNeighbor& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.flow != b.flow) return a.flow > b.flow;
    return a.node < b.node;
  });
  return ranked;
}

// Keeps the N_c most important neighbours plus every node on a BFS shortest
// path from the center to them. Ranking is computed once on the input.
// A subgraph already compressed at a budget no larger than N_c is returned
// as is.
inline Subgraph compress_sigc(const Subgraph& sub, const SamplingConfig& cfg) {
  cfg.validate();
  if (sub.compressed_budget && *sub.compressed_budget <= cfg.budget) return sub;
  if (sub.nodes.size() <= cfg.budget) return sub;

  auto ranked = rank_by_importance(sub, cfg.beta);
  auto adj = detail::undirected_local_adjacency(sub);
  auto bfs = detail::bfs_local(adj, 0);

  std::vector<char> keep(sub.nodes.size(), 0);
  keep[0] = 1;
  const std::size_t n_keep = std::min(cfg.budget, ranked.size());
  for (std::size_t r = 0; r < n_keep; ++r) {
    std::ptrdiff_t cur = static_cast<std::ptrdiff_t>(ranked[r].local);
    if (bfs.dist[cur] < 0) throw DataError("subgraph is not connected to its center");
    while (cur >= 0 && !keep[cur]) {
      keep[cur] = 1;
      cur = bfs.parent[cur];
    }
  }

  Subgraph out;
  out.center = sub.center;
  out.decimals = sub.decimals;
  std::unordered_set<NodeId> kept;
  for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
    if (!keep[i]) continue;
    out.nodes.push_back(sub.nodes[i]);
    kept.insert(sub.nodes[i]);
  }
  for (const auto& e : sub.edges)
    if (kept.count(e.src) && kept.count(e.dst)) out.edges.push_back(e);
  detail::assign_bfs_hops(out);
  out.compressed_budget = cfg.budget;
  return out;
}

inline Subgraph build_subgraph(const TransactionGraph& g, NodeId center, const SamplingConfig& cfg) {
  return compress_sigc(sample_khop(g, center, cfg), cfg);
}

// Builds sampled and compressed subgraphs for many centers. Construction is
// pure over the immutable graph, so centers are split across worker threads.
inline std::vector<Subgraph> build_subgraphs(const TransactionGraph& g, std::span<const NodeId> centers,
                                             const SamplingConfig& cfg, unsigned threads = 0) {
  cfg.validate();
  std::vector<Subgraph> out(centers.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, centers.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < centers.size(); ++i) out[i] = build_subgraph(g, centers[i], cfg);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < centers.size(); i += threads) out[i] = build_subgraph(g, centers[i], cfg);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// Symmetric-normalised adjacency with self loops, D^-1/2 (A + I) D^-1/2, over
// the undirected view of the subgraph in node order.
inline Matrix normalized_adjacency(const Subgraph& sub) {
  const std::size_t n = sub.nodes.size();
  auto adj = detail::undirected_local_adjacency(sub);
  Matrix a(n, n);
  std::vector<double> deg(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) deg[i] += static_cast<double>(adj[i].size());
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 1.0 / deg[i];
    for (std::size_t j : adj[i]) a(i, j) = 1.0 / std::sqrt(deg[i] * deg[j]);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Line-delimited JSON cache: one subgraph per line, account ids resolved
// through the graph.
// ---------------------------------------------------------------------------

inline nlohmann::json subgraph_to_json(const Subgraph& sub, const TransactionGraph& g) {
  nlohmann::json j;
  j["center"] = g.name(sub.center);
  auto nodes = nlohmann::json::array();
  nlohmann::json hop = nlohmann::json::object();
  for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
    nodes.push_back(g.name(sub.nodes[i]));
    hop[g.name(sub.nodes[i])] = sub.hop[i];
  }
  j["nodes"] = std::move(nodes);
  j["hop"] = std::move(hop);
  auto edges = nlohmann::json::array();
  for (const auto& e : sub.edges) {
    edges.push_back({{"src", g.name(e.src)},
                     {"dst", g.name(e.dst)},
                     {"cum_amount", e.cum_amount.to_string()},
                     {"tx_count", e.tx_count},
                     {"first_ts", e.first_ts},
                     {"last_ts", e.last_ts},
                     {"aux", e.aux_sums}});
  }
  j["edges"] = std::move(edges);
  j["decimals"] = sub.decimals;
  j["compressed_budget"] = sub.compressed_budget ? nlohmann::json(*sub.compressed_budget) : nlohmann::json(nullptr);
  return j;
}

inline Subgraph subgraph_from_json(const nlohmann::json& j, const TransactionGraph& g) {
  try {
    Subgraph sub;
    sub.center = g.id(j.at("center").get<std::string>());
    const auto& hop = j.at("hop");
    for (const auto& n : j.at("nodes")) {
      const auto name = n.get<std::string>();
      sub.nodes.push_back(g.id(name));
      sub.hop.push_back(hop.at(name).get<int>());
    }
    if (sub.nodes.empty() || sub.nodes[0] != sub.center) throw DataError("subgraph must list its center first");
    for (const auto& je : j.at("edges")) {
      EdgeRecord e;
      e.src = g.id(je.at("src").get<std::string>());
      e.dst = g.id(je.at("dst").get<std::string>());
      e.cum_amount = Amount::parse(je.at("cum_amount").get<std::string>(), 0);
      e.tx_count = je.at("tx_count").get<std::uint64_t>();
      e.first_ts = je.at("first_ts").get<std::int64_t>();
      e.last_ts = je.at("last_ts").get<std::int64_t>();
      e.aux_sums = je.at("aux").get<std::map<std::string, double>>();
      sub.edges.push_back(std::move(e));
    }
    sub.decimals = j.at("decimals").get<int>();
    if (!j.at("compressed_budget").is_null()) sub.compressed_budget = j.at("compressed_budget").get<std::size_t>();
    return sub;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed subgraph record: ") + e.what());
  }
}

inline std::string subgraphs_to_jsonl(std::span<const Subgraph> subs, const TransactionGraph& g) {
  std::string out;
  for (const auto& s : subs) out += subgraph_to_json(s, g).dump() + "\n";
  return out;
}

inline std::vector<Subgraph> subgraphs_from_jsonl(std::string_view text, const TransactionGraph& g) {
  std::vector<Subgraph> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim(text.substr(start, end - start));
    if (!line.empty()) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed subgraph line: ") + e.what());
      }
      out.push_back(subgraph_from_json(j, g));
    }
    start = end + 1;
  }
  return out;
}

}  // namespace fraudgraph
