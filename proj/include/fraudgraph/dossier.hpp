#pragma once

#include <algorithm>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include "fraudgraph/common.hpp"
#include "fraudgraph/ingest.hpp"

namespace fraudgraph {

enum class Direction { in, out };

inline const char* to_string(Direction d) { return d == Direction::in ? "in" : "out"; }

struct PartnerRow {
  std::string partner;  // pseudonym
  Direction direction = Direction::out;
  double cum_amount = 0.0;
  std::uint64_t tx_count = 0;
  std::int64_t first_ts = 0;
  std::int64_t last_ts = 0;
};

// Redacted view of one account's history. Raw account identifiers never
// enter a dossier: the account is "TARGET" and partners are "CP-<rank>",
// ranked by total interaction amount.
struct AccountDossier {
  std::string chain;
  std::string center = "TARGET";
  std::vector<PartnerRow> rows;
  double total_in = 0.0;
  double total_out = 0.0;
  std::uint64_t tx_in = 0;
  std::uint64_t tx_out = 0;
  std::size_t unique_partners = 0;
  std::size_t in_partners = 0;
  std::size_t out_partners = 0;
  double active_span_days = 0.0;
  double fee_total = 0.0;
  std::int64_t first_ts = 0;
  std::int64_t last_ts = 0;
};

inline AccountDossier build_dossier(const TransactionGraph& g, NodeId account) {
  if (account >= g.node_count()) throw NotFoundError("account " + std::to_string(account));
  AccountDossier d;
  d.chain = to_string(g.chain());

  std::map<NodeId, double> partner_total;
  bool any = false;
  auto touch_ts = [&](const EdgeRecord& e) {
    if (!any) {
      d.first_ts = e.first_ts;
      d.last_ts = e.last_ts;
      any = true;
    }
    d.first_ts = std::min(d.first_ts, e.first_ts);
    d.last_ts = std::max(d.last_ts, e.last_ts);
  };
  for (std::size_t ei : g.out_edges(account)) {
    const auto& e = g.edge(ei);
    const double a = g.native(e.cum_amount);
    d.total_out += a;
    d.tx_out += e.tx_count;
    ++d.out_partners;
    if (auto f = e.aux_sums.find("fee"); f != e.aux_sums.end()) d.fee_total += f->second;
    else if (auto f2 = e.aux_sums.find("fee_sat"); f2 != e.aux_sums.end()) d.fee_total += f2->second;
    if (e.dst != account) partner_total[e.dst] += a;
    touch_ts(e);
  }
  for (std::size_t ei : g.in_edges(account)) {
    const auto& e = g.edge(ei);
    const double a = g.native(e.cum_amount);
    d.total_in += a;
    d.tx_in += e.tx_count;
    ++d.in_partners;
    if (e.src != account) partner_total[e.src] += a;
    touch_ts(e);
  }
  d.unique_partners = partner_total.size();
  d.active_span_days = static_cast<double>(d.last_ts - d.first_ts) / 86400.0;

  std::vector<std::pair<NodeId, double>> order(partner_total.begin(), partner_total.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::map<NodeId, std::string> pseudonym;
  pseudonym[account] = d.center;
  for (std::size_t i = 0; i < order.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "CP-%04zu", i + 1);
    pseudonym[order[i].first] = buf;
  }
  for (std::size_t ei : g.out_edges(account)) {
    const auto& e = g.edge(ei);
    d.rows.push_back({pseudonym.at(e.dst), Direction::out, g.native(e.cum_amount), e.tx_count, e.first_ts, e.last_ts});
  }
  for (std::size_t ei : g.in_edges(account)) {
    const auto& e = g.edge(ei);
    if (e.src == account) continue;  // self-transfer already listed as outgoing
    d.rows.push_back({pseudonym.at(e.src), Direction::in, g.native(e.cum_amount), e.tx_count, e.first_ts, e.last_ts});
  }
  std::sort(d.rows.begin(), d.rows.end(), [](const PartnerRow& a, const PartnerRow& b) {
    if (a.cum_amount != b.cum_amount) return a.cum_amount > b.cum_amount;
    if (a.partner != b.partner) return a.partner < b.partner;
    return a.direction < b.direction;
  });
  return d;
}

// Patterns that identify raw on-chain accounts. Anything matching must not
// reach a prompt, a summary or the evidence store.
class RedactionPolicy {
 public:
  RedactionPolicy() {
    add(R"(0x[0-9a-fA-F]{40})");                      // ethereum
    add(R"(\b[13][a-km-zA-HJ-NP-Z1-9]{25,34}\b)");    // bitcoin base58
    add(R"(\bbc1[02-9ac-hj-np-z]{11,71}\b)");         // bitcoin bech32
  }

  void add(const std::string& pattern) {
    sources_.push_back(pattern);
    patterns_.emplace_back(pattern, std::regex::ECMAScript | std::regex::optimize);
  }

  // Returns the first offending substring, or an empty string when clean.
  std::string find_violation(const std::string& text) const {
    for (const auto& re : patterns_) {
      std::smatch m;
      if (std::regex_search(text, m, re)) return m.str();
    }
    return {};
  }

  void require_clean(const std::string& text, const char* where) const {
    auto v = find_violation(text);
    if (!v.empty()) throw DataError(std::string("raw account identifier '") + v + "' found in " + where);
  }

  const std::vector<std::string>& sources() const { return sources_; }

 private:
  std::vector<std::string> sources_;
  std::vector<std::regex> patterns_;
};

inline void require_redacted(const AccountDossier& d, const RedactionPolicy& policy) {
  policy.require_clean(d.center, "dossier center pseudonym");
  policy.require_clean(d.chain, "dossier chain tag");
  for (const auto& r : d.rows) policy.require_clean(r.partner, "dossier partner pseudonym");
}

}  // namespace fraudgraph
