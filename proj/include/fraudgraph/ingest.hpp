#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fraudgraph/amount.hpp"
#include "fraudgraph/common.hpp"

namespace fraudgraph {

enum class Chain { ethereum, bitcoin, generic };

inline Chain parse_chain(std::string_view tag) {
  if (tag == "ethereum" || tag == "eth") return Chain::ethereum;
  if (tag == "bitcoin" || tag == "btc") return Chain::bitcoin;
  if (tag == "generic") return Chain::generic;
  throw ConfigError("unknown chain schema '" + std::string(tag) + "'");
}

inline std::string to_string(Chain c) {
  switch (c) {
    case Chain::ethereum: return "ethereum";
    case Chain::bitcoin: return "bitcoin";
    case Chain::generic: return "generic";
  }
  return "generic";
}

// Decimal exponent between base units and native units.
inline int native_decimals(Chain c) {
  switch (c) {
    case Chain::ethereum: return 18;
    case Chain::bitcoin: return 8;
    case Chain::generic: return 8;
  }
  return 8;
}

enum class TxStatus { success, failed };

struct RawTransaction {
  Chain chain = Chain::generic;
  std::string tx_id;
  std::string from_account;
  std::string to_account;
  Amount amount;
  std::int64_t timestamp = 0;
  std::optional<Amount> fee;
  TxStatus status = TxStatus::success;
  std::map<std::string, double> aux;
};

struct EdgeRecord {
  NodeId src = 0;
  NodeId dst = 0;
  Amount cum_amount;
  std::uint64_t tx_count = 0;
  std::int64_t first_ts = 0;
  std::int64_t last_ts = 0;
  std::map<std::string, double> aux_sums;

  friend bool operator==(const EdgeRecord&, const EdgeRecord&) = default;
};

enum class Label : std::int8_t { unlabeled = -1, benign = 0, fraud = 1 };

// Global directed graph after edge aggregation. Node ids are assigned in
// lexicographic order of account ids, edges are sorted by (src, dst).
class TransactionGraph {
 public:
  TransactionGraph() = default;
  TransactionGraph(Chain chain, std::vector<std::string> names, std::vector<EdgeRecord> edges)
      : chain_(chain), names_(std::move(names)), edges_(std::move(edges)) {
    rebuild_indices();
    labels_.assign(names_.size(), Label::unlabeled);
  }

  Chain chain() const { return chain_; }
  int decimals() const { return native_decimals(chain_); }
  std::size_t node_count() const { return names_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(NodeId id) const { return names_.at(id); }
  const std::vector<EdgeRecord>& edges() const { return edges_; }
  const EdgeRecord& edge(std::size_t i) const { return edges_[i]; }
  std::span<const std::size_t> out_edges(NodeId v) const { return out_index_[v]; }
  std::span<const std::size_t> in_edges(NodeId v) const { return in_index_[v]; }

  std::optional<NodeId> find(std::string_view account) const {
    auto it = index_.find(std::string(account));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  NodeId id(std::string_view account) const {
    auto f = find(account);
    if (!f) throw NotFoundError("account '" + std::string(account) + "' is not in the graph");
    return *f;
  }

  // Index of edge src->dst, if any.
  std::optional<std::size_t> edge_between(NodeId src, NodeId dst) const {
    const auto& outs = out_index_[src];
    auto it = std::lower_bound(outs.begin(), outs.end(), dst,
                               [&](std::size_t e, NodeId d) { return edges_[e].dst < d; });
    if (it != outs.end() && edges_[*it].dst == dst) return *it;
    return std::nullopt;
  }

  double native(Amount a) const { return a.to_native(decimals()); }

  Label label(NodeId v) const { return labels_[v]; }
  const std::vector<Label>& labels() const { return labels_; }
  void set_label(NodeId v, Label l) { labels_.at(v) = l; }

  std::vector<NodeId> labeled_nodes() const {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < labels_.size(); ++v)
      if (labels_[v] != Label::unlabeled) out.push_back(v);
    return out;
  }

  friend bool operator==(const TransactionGraph& a, const TransactionGraph& b) {
    return a.chain_ == b.chain_ && a.names_ == b.names_ && a.edges_ == b.edges_ && a.labels_ == b.labels_;
  }

 private:
  void rebuild_indices() {
    index_.clear();
    for (NodeId i = 0; i < names_.size(); ++i) {
      if (!index_.emplace(names_[i], i).second) throw DataError("duplicate node id '" + names_[i] + "'");
    }
    out_index_.assign(names_.size(), {});
    in_index_.assign(names_.size(), {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto& r = edges_[e];
      if (r.src >= names_.size() || r.dst >= names_.size()) throw DataError("edge endpoint out of range");
      if (e > 0) {
        const auto& p = edges_[e - 1];
        if (std::pair(p.src, p.dst) >= std::pair(r.src, r.dst))
          throw DataError("edges must be unique and sorted by (src, dst)");
      }
      out_index_[r.src].push_back(e);
      in_index_[r.dst].push_back(e);
    }
    for (auto& ins : in_index_) {
      std::sort(ins.begin(), ins.end(), [&](std::size_t a, std::size_t b) { return edges_[a].src < edges_[b].src; });
    }
  }

  Chain chain_ = Chain::generic;
  std::vector<std::string> names_;
  std::vector<EdgeRecord> edges_;
  std::vector<Label> labels_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<std::vector<std::size_t>> out_index_;
  std::vector<std::vector<std::size_t>> in_index_;
};

struct IngestReport {
  std::size_t retained = 0;
  std::size_t dropped_zero_amount = 0;
  std::size_t dropped_failed = 0;
  std::map<std::string, std::size_t> rejected;  // reason -> count

  std::size_t rejected_total() const {
    std::size_t n = 0;
    for (const auto& [_, c] : rejected) n += c;
    return n;
  }
};

struct IngestResult {
  TransactionGraph graph;
  IngestReport report;
};

namespace detail {

inline void validate(const RawTransaction& tx) {
  if (tx.from_account.empty()) throw DataError("empty from account");
  if (tx.to_account.empty()) throw DataError("empty to account");
  if (tx.amount < Amount{}) throw DataError("negative amount");
  if (tx.timestamp < 0) throw DataError("negative timestamp");
  if (tx.fee && *tx.fee < Amount{}) throw DataError("negative fee");
}

inline std::tuple<std::int64_t, std::string, Amount::Rep> canonical_key(const RawTransaction& t) {
  return {t.timestamp, t.tx_id, t.amount.base()};
}

}  // namespace detail

// Filters zero-amount and failed transfers, then merges parallel transfers of
// each ordered (from, to) pair into one EdgeRecord. The result does not depend
// on record order: groups are summed in a canonical per-record order.
inline IngestResult ingest_records(std::span<const RawTransaction> records, Chain chain,
                                   IngestReport report = {}) {
  std::map<std::pair<std::string, std::string>, std::vector<const RawTransaction*>> groups;
  for (const auto& tx : records) {
    try {
      detail::validate(tx);
    } catch (const DataError& e) {
      ++report.rejected[e.what()];
      continue;
    }
    if (tx.status == TxStatus::failed) {
      ++report.dropped_failed;
      continue;
    }
    if (tx.amount.is_zero()) {
      ++report.dropped_zero_amount;
      continue;
    }
    ++report.retained;
    groups[{tx.from_account, tx.to_account}].push_back(&tx);
  }

  std::vector<std::string> names;
  for (const auto& [key, _] : groups) {
    names.push_back(key.first);
    names.push_back(key.second);
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  auto id_of = [&](const std::string& n) {
    return static_cast<NodeId>(std::lower_bound(names.begin(), names.end(), n) - names.begin());
  };

  std::vector<EdgeRecord> edges;
  edges.reserve(groups.size());
  for (auto& [key, txs] : groups) {
    std::sort(txs.begin(), txs.end(), [](const RawTransaction* a, const RawTransaction* b) {
      return detail::canonical_key(*a) < detail::canonical_key(*b);
    });
    EdgeRecord e;
    e.src = id_of(key.first);
    e.dst = id_of(key.second);
    e.first_ts = txs.front()->timestamp;
    e.last_ts = txs.front()->timestamp;
    const int dec = native_decimals(chain);
    for (const RawTransaction* t : txs) {
      e.cum_amount += t->amount;
      ++e.tx_count;
      e.first_ts = std::min(e.first_ts, t->timestamp);
      e.last_ts = std::max(e.last_ts, t->timestamp);
      if (t->fee) e.aux_sums["fee"] += t->fee->to_native(dec);
      for (const auto& [k, v] : t->aux) e.aux_sums[k] += v;
    }
    edges.push_back(std::move(e));
  }
  std::sort(edges.begin(), edges.end(),
            [](const EdgeRecord& a, const EdgeRecord& b) { return std::pair(a.src, a.dst) < std::pair(b.src, b.dst); });
  return {TransactionGraph(chain, std::move(names), std::move(edges)), std::move(report)};
}

// ---------------------------------------------------------------------------
// Record parsing. Column sets per chain:
//   ethereum: tx_id, from, to, value_wei, timestamp, gas_fee, status
//   bitcoin:  tx_id, from, to, value_sat, timestamp, input_count, output_count, fee_sat, status
//   generic:  tx_id, from, to, amount, timestamp, fee, status   (amount/fee in native units)
// ---------------------------------------------------------------------------

struct ChainColumns {
  const char* value;
  int value_scale;  // decimal digits to shift the textual value into base units
  const char* fee;
  int fee_scale;
  std::vector<const char*> aux;
};

inline ChainColumns chain_columns(Chain c) {
  switch (c) {
    case Chain::ethereum: return {"value_wei", 0, "gas_fee", 0, {}};
    case Chain::bitcoin: return {"value_sat", 0, "fee_sat", 0, {"input_count", "output_count"}};
    case Chain::generic: return {"amount", 8, "fee", 8, {}};
  }
  return {"amount", 8, "fee", 8, {}};
}

namespace detail {

inline TxStatus parse_status(std::string_view s) {
  std::string v(s);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v.empty() || v == "success" || v == "ok" || v == "1" || v == "true") return TxStatus::success;
  if (v == "failed" || v == "fail" || v == "error" || v == "0" || v == "false" || v == "reverted")
    return TxStatus::failed;
  throw DataError("unknown status '" + std::string(s) + "'");
}

inline std::int64_t parse_int(std::string_view s, const char* field) {
  std::string t = trim(s);
  if (t.empty()) throw DataError(std::string("missing ") + field);
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &pos);
  } catch (const std::exception&) {
    throw DataError(std::string("malformed ") + field);
  }
  if (pos != t.size()) throw DataError(std::string("malformed ") + field);
  return v;
}

inline double parse_real(std::string_view s, const char* field) {
  std::string t = trim(s);
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw DataError(std::string("malformed ") + field);
  }
  if (pos != t.size() || !std::isfinite(v)) throw DataError(std::string("malformed ") + field);
  return v;
}

// Field accessor over either a JSON object or a CSV row.
template <typename Get>
RawTransaction parse_fields(Chain chain, Get&& get) {
  const ChainColumns cols = chain_columns(chain);
  RawTransaction tx;
  tx.chain = chain;
  auto req = [&](const char* k) {
    std::optional<std::string> v = get(k);
    if (!v) throw DataError(std::string("missing ") + k);
    return *v;
  };
  tx.tx_id = req("tx_id");
  tx.from_account = trim(req("from"));
  tx.to_account = trim(req("to"));
  if (tx.from_account.empty()) throw DataError("empty from account");
  if (tx.to_account.empty()) throw DataError("empty to account");
  tx.amount = Amount::parse(req(cols.value), cols.value_scale);
  tx.timestamp = parse_int(req("timestamp"), "timestamp");
  if (tx.timestamp < 0) throw DataError("negative timestamp");
  if (auto f = get(cols.fee); f && !trim(*f).empty()) tx.fee = Amount::parse(*f, cols.fee_scale);
  if (auto s = get("status")) tx.status = parse_status(trim(*s));
  for (const char* a : cols.aux) {
    if (auto v = get(a); v && !trim(*v).empty()) tx.aux[a] = parse_real(*v, a);
  }
  return tx;
}

}  // namespace detail

inline RawTransaction parse_json_record(const nlohmann::json& obj, Chain chain) {
  if (!obj.is_object()) throw DataError("record is not an object");
  return detail::parse_fields(chain, [&](const char* key) -> std::optional<std::string> {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_unsigned()) return std::to_string(it->get<std::uint64_t>());
    if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
    if (it->is_number_float()) {
      // Only the generic schema carries fractional native amounts.
      std::ostringstream os;
      os << std::setprecision(15) << it->get<double>();
      return os.str();
    }
    if (it->is_boolean()) return it->get<bool>() ? "true" : "false";
    throw DataError(std::string("unsupported value type for ") + key);
  });
}

inline RawTransaction parse_csv_record(const std::vector<std::string>& header, const std::vector<std::string>& row,
                                       Chain chain) {
  if (row.size() != header.size()) throw DataError("column count mismatch");
  return detail::parse_fields(chain, [&](const char* key) -> std::optional<std::string> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == key) return row[i];
    return std::nullopt;
  });
}

enum class InputFormat { jsonl, csv };

inline InputFormat parse_input_format(std::string_view tag) {
  if (tag == "jsonl" || tag == "json" || tag == "ndjson") return InputFormat::jsonl;
  if (tag == "csv") return InputFormat::csv;
  throw ConfigError("unknown input format '" + std::string(tag) + "'");
}

// Streams records, rejecting malformed ones individually with a counted reason.
inline IngestResult ingest_transactions(std::istream& in, Chain chain, InputFormat format) {
  std::vector<RawTransaction> records;
  IngestReport report;
  std::string line;
  std::vector<std::string> header;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      if (format == InputFormat::jsonl) {
        nlohmann::json obj;
        try {
          obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
          throw DataError("invalid json");
        }
        records.push_back(parse_json_record(obj, chain));
      } else {
        auto row = split_csv_line(line);
        if (first) {
          header = std::move(row);
          first = false;
          continue;
        }
        records.push_back(parse_csv_record(header, row, chain));
      }
    } catch (const DataError& e) {
      ++report.rejected[e.what()];
    }
  }
  return ingest_records(records, chain, std::move(report));
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

struct LabelReport {
  std::size_t applied = 0;
  std::size_t skipped_missing = 0;
  std::vector<std::string> missing_accounts;
};

struct LabeledGraph {
  TransactionGraph graph;
  LabelReport report;
};

inline LabeledGraph attach_labels(TransactionGraph graph, std::span<const std::pair<std::string, int>> labels) {
  LabelReport report;
  std::unordered_map<std::string, int> seen;
  for (const auto& [account, value] : labels) {
    if (value != 0 && value != 1)
      throw DataError("label for '" + account + "' must be 0 or 1, got " + std::to_string(value));
    auto [it, inserted] = seen.emplace(account, value);
    if (!inserted && it->second != value) throw DataError("conflicting labels for account '" + account + "'");
  }
  for (const auto& [account, value] : labels) {
    auto id = graph.find(account);
    if (!id) {
      ++report.skipped_missing;
      report.missing_accounts.push_back(account);
      continue;
    }
    Label l = value == 1 ? Label::fraud : Label::benign;
    if (graph.label(*id) != Label::unlabeled && graph.label(*id) != l)
      throw DataError("conflicting labels for account '" + account + "'");
    if (graph.label(*id) == Label::unlabeled) ++report.applied;
    graph.set_label(*id, l);
  }
  return {std::move(graph), std::move(report)};
}

// CSV (account,label). A header row is skipped when its label column is not numeric.
inline std::vector<std::pair<std::string, int>> read_labels_csv(std::istream& in) {
  std::vector<std::pair<std::string, int>> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto row = split_csv_line(line);
    if (row.size() < 2) throw DataError("label row needs account,label: '" + line + "'");
    int value = 0;
    try {
      std::size_t pos = 0;
      value = std::stoi(row[1], &pos);
      if (pos != row[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      if (first) {
        first = false;
        continue;
      }
      throw DataError("malformed label '" + row[1] + "' for account '" + row[0] + "'");
    }
    first = false;
    out.emplace_back(row[0], value);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetSplits {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;
};

struct LabeledNode {
  NodeId node;
  int label;
};

// Per-class split sizes: floor of n*ratio, leftover distributed by largest
// fractional remainder (ties: train, val, test). Every split then receives at
// least one member of the class, taken from the largest split.
inline std::array<std::size_t, 3> stratum_sizes(std::size_t n, const SplitRatios& r) {
  const double ratios[3] = {r.train, r.val, r.test};
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double raw = static_cast<double>(n) * ratios[i];
    // Guard against 0.1*80 = 7.999999... style representation error.
    double fl = std::floor(raw + 1e-9);
    sizes[i] = static_cast<std::size_t>(fl);
    rem[i] = raw - fl;
    assigned += sizes[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[i] > rem[best] + 1e-12) best = i;
    ++sizes[best];
    rem[best] = -1.0;
    ++assigned;
  }
  for (int i = 0; i < 3; ++i) {
    if (sizes[i] == 0) {
      int donor = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      --sizes[donor];
      ++sizes[i];
    }
  }
  return sizes;
}

template <typename Rng = std::mt19937_64>
DatasetSplits split_dataset(std::span<const LabeledNode> labeled, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0)
    throw ConfigError("split ratios must be positive");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
  std::map<int, std::vector<NodeId>> by_class;
  for (const auto& ln : labeled) by_class[ln.label].push_back(ln.node);

  DatasetSplits out;
  Rng rng(seed);
  for (auto& [label, nodes] : by_class) {
    if (nodes.size() < 3)
      throw DataError("class " + std::to_string(label) + " has " + std::to_string(nodes.size()) +
                      " member(s); at least 3 are needed to stratify into train/val/test");
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    shuffle_in_place(nodes, rng);
    auto sizes = stratum_sizes(nodes.size(), ratios);
    auto it = nodes.begin();
    out.train.insert(out.train.end(), it, it + sizes[0]);
    it += sizes[0];
    out.val.insert(out.val.end(), it, it + sizes[1]);
    it += sizes[1];
    out.test.insert(out.test.end(), it, it + sizes[2]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline constexpr int kGraphFormatVersion = 1;

inline nlohmann::json graph_to_json(const TransactionGraph& g) {
  nlohmann::json j;
  j["format"] = "fraudgraph.transaction_graph";
  j["version"] = kGraphFormatVersion;
  j["chain"] = to_string(g.chain());
  j["nodes"] = g.names();
  auto labels = nlohmann::json::array();
  for (Label l : g.labels()) labels.push_back(static_cast<int>(l));
  j["labels"] = std::move(labels);
  auto edges = nlohmann::json::array();
  for (const auto& e : g.edges()) {
    nlohmann::json je;
    je["src"] = e.src;
    je["dst"] = e.dst;
    je["cum_amount"] = e.cum_amount.to_string();
    je["tx_count"] = e.tx_count;
    je["first_ts"] = e.first_ts;
    je["last_ts"] = e.last_ts;
    je["aux"] = e.aux_sums;
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  return j;
}

inline TransactionGraph graph_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "fraudgraph.transaction_graph") throw DataError("not a transaction graph file");
    if (j.at("version").get<int>() != kGraphFormatVersion)
      throw DataError("unsupported graph format version " + j.at("version").dump());
    Chain chain = parse_chain(j.at("chain").get<std::string>());
    auto names = j.at("nodes").get<std::vector<std::string>>();
    std::vector<EdgeRecord> edges;
    for (const auto& je : j.at("edges")) {
      EdgeRecord e;
      e.src = je.at("src").get<NodeId>();
      e.dst = je.at("dst").get<NodeId>();
      e.cum_amount = Amount::parse(je.at("cum_amount").get<std::string>(), 0);
      e.tx_count = je.at("tx_count").get<std::uint64_t>();
      e.first_ts = je.at("first_ts").get<std::int64_t>();
      e.last_ts = je.at("last_ts").get<std::int64_t>();
      e.aux_sums = je.at("aux").get<std::map<std::string, double>>();
      if (e.tx_count == 0 || e.first_ts > e.last_ts) throw DataError("invalid edge record");
      edges.push_back(std::move(e));
    }
    TransactionGraph g(chain, std::move(names), std::move(edges));
    const auto& labels = j.at("labels");
    if (labels.size() != g.node_count()) throw DataError("label array length mismatch");
    for (NodeId v = 0; v < g.node_count(); ++v) {
      int l = labels[v].get<int>();
      if (l < -1 || l > 1) throw DataError("invalid label value");
      g.set_label(v, static_cast<Label>(l));
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed graph file: ") + e.what());
  }
}

inline void save_graph(const TransactionGraph& g, const std::filesystem::path& path) {
  write_file_atomic(path, graph_to_json(g).dump() + "\n");
}

inline TransactionGraph load_graph(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed graph file " + path.string() + ": " + e.what());
  }
  return graph_from_json(j);
}

}  // namespace fraudgraph
