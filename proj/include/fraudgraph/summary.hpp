#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fraudgraph/common.hpp"
#include "fraudgraph/dossier.hpp"

namespace fraudgraph {

inline constexpr const char* kForensicTemplateVersion = "forensic-v1";

struct PromptOptions {
  std::string template_version = kForensicTemplateVersion;
  std::size_t max_partner_rows = 200;  // row budget standing in for the token budget
};

struct ForensicPrompt {
  std::string text;
  std::string template_version;
  std::string cache_key;
  std::size_t rows_kept = 0;
  std::size_t rows_total = 0;
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

// Chain-of-thought forensic prompt over the four analysis dimensions with the
// serialized dossier. Deterministic given its inputs.
inline ForensicPrompt build_forensic_prompt(const AccountDossier& d, const PromptOptions& opt = {},
                                            const RedactionPolicy& redaction = RedactionPolicy{}) {
  require_redacted(d, redaction);
  std::vector<PartnerRow> rows = d.rows;
  std::stable_sort(rows.begin(), rows.end(),
                   [](const PartnerRow& a, const PartnerRow& b) { return a.cum_amount > b.cum_amount; });
  const std::size_t total = rows.size();
  const bool truncated = total > opt.max_partner_rows;
  if (truncated) rows.resize(opt.max_partner_rows);

  std::ostringstream p;
  p << "You are a blockchain forensics analyst. Analyse the transaction records of one account and "
       "write a concise factual summary of its behaviour.\n"
    << "Rules: use only the records provided below. Do not look up, query or infer account identities "
       "from any external source, block explorer or label database. All identifiers are pseudonyms.\n"
    << "Reason step by step over four dimensions before writing the summary:\n"
    << "1. Value Flow: inflow and outflow totals, net direction, concentration of value.\n"
    << "2. Counterparty (Partner) Analysis: number of partners, fan-in and fan-out structure, repeated partners.\n"
    << "3. Transaction Timing: active span, frequency, bursts of activity within short windows.\n"
    << "4. Gas Expenditure: total fees paid and unusual fee behaviour.\n"
    << "Write the final summary as plain declarative sentences.\n\n"
    << "[TEMPLATE " << opt.template_version << "]\n"
    << "[ACCOUNT AGGREGATES]\n"
    << "chain: " << d.chain << "\n"
    << "account: " << d.center << "\n"
    << "total_in: " << detail::fmt_num(d.total_in) << "\n"
    << "total_out: " << detail::fmt_num(d.total_out) << "\n"
    << "tx_in: " << d.tx_in << "\n"
    << "tx_out: " << d.tx_out << "\n"
    << "unique_partners: " << d.unique_partners << "\n"
    << "in_partners: " << d.in_partners << "\n"
    << "out_partners: " << d.out_partners << "\n"
    << "active_span_days: " << detail::fmt_num(d.active_span_days) << "\n"
    << "fee_total: " << detail::fmt_num(d.fee_total) << "\n"
    << "[PARTNER ROWS]\n"
    << "partner,direction,cum_amount,tx_count,first_ts,last_ts\n";
  for (const auto& r : rows) {
    p << r.partner << ',' << to_string(r.direction) << ',' << detail::fmt_num(r.cum_amount) << ',' << r.tx_count
      << ',' << r.first_ts << ',' << r.last_ts << "\n";
  }
  if (truncated) {
    p << "[TRUNCATED: " << (total - rows.size()) << " of " << total << " partner rows omitted; kept the "
      << rows.size() << " largest by amount]\n";
  }
  p << "[END]\n";

  ForensicPrompt out;
  out.text = p.str();
  redaction.require_clean(out.text, "forensic prompt");
  out.template_version = opt.template_version;
  out.cache_key = content_digest(opt.template_version + "\n" + out.text);
  out.rows_kept = rows.size();
  out.rows_total = total;
  return out;
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

struct CompletionRequest {
  std::string model;
  std::string prompt;
  int max_tokens = 512;
  double temperature = 0.0;
  bool logprobs = false;
};

struct Completion {
  std::string text;
  std::optional<std::vector<double>> token_logprobs;
};

class Summarizer {
 public:
  virtual ~Summarizer() = default;
  virtual Completion complete(const CompletionRequest& req) = 0;
  virtual std::string tag() const = 0;
};

// Offline backend. Reads the aggregates block of a forensic prompt and emits
// rule-based sentences:
//   always        activity sentence (transactions, partners, span)
//   out > 10*in   net-outflow dominance
//   in > 10*out   net-inflow dominance
//   in_partners >= 8   fan-in aggregation
//   out_partners >= 8  fan-out distribution
//   tx >= 10 within 24h          burst
//   in ~ out (0.8..1.25) within 72h  rapid relay
//   > 5 transfers/day (no burst)  high frequency
//   fee_total > 0 gas expenditure; always inflow/outflow totals
//   no risk flag  small and stable amounts
//   digest % 3 == 0  an unsupported business-hours remark (noise)
class MockSummarizer : public Summarizer {
 public:
  static constexpr double kDominanceRatio = 10.0;
  static constexpr std::size_t kFanWidth = 8;
  static constexpr std::uint64_t kBurstCount = 10;
  static constexpr double kBurstHours = 24.0;
  static constexpr double kRelayHours = 72.0;
  static constexpr double kHighFrequencyPerDay = 5.0;

  Completion complete(const CompletionRequest& req) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return {render(parse_aggregates(req.prompt)), std::nullopt};
  }
  std::string tag() const override { return "mock"; }
  std::size_t calls() const { return calls_.load(); }

  static std::map<std::string, std::string> parse_aggregates(const std::string& prompt) {
    std::map<std::string, std::string> kv;
    auto start = prompt.find("[ACCOUNT AGGREGATES]");
    if (start == std::string::npos) return kv;
    std::istringstream in(prompt.substr(start));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] == '[') break;
      auto c = line.find(": ");
      if (c != std::string::npos) kv[line.substr(0, c)] = line.substr(c + 2);
    }
    return kv;
  }

  static std::string render(const std::map<std::string, std::string>& kv) {
    auto num = [&](const char* k) {
      auto it = kv.find(k);
      return it == kv.end() ? 0.0 : std::atof(it->second.c_str());
    };
    const double in = num("total_in"), out = num("total_out");
    const double tx = num("tx_in") + num("tx_out");
    const double partners = num("unique_partners");
    const double in_p = num("in_partners"), out_p = num("out_partners");
    const double days = num("active_span_days");
    const double hours = days * 24.0;
    const double fee = num("fee_total");
    char buf[256];
    std::vector<std::string> s;
    bool risk = false;

    std::snprintf(buf, sizeof buf, "The account executed %.0f transactions with %.0f unique partners over %.1f days.",
                  tx, partners, days);
    s.emplace_back(buf);
    if (out > kDominanceRatio * in && out > 0) {
      risk = true;
      if (in > 0)
        std::snprintf(buf, sizeof buf,
                      "The account shows significant net outflow dominance, sending %.1f times more value than it "
                      "receives.",
                      out / in);
      else
        std::snprintf(buf, sizeof buf, "The account shows significant net outflow dominance with no recorded inflow.");
      s.emplace_back(buf);
    } else if (in > kDominanceRatio * out && in > 0) {
      risk = true;
      s.emplace_back("The account shows significant net inflow dominance, retaining most of the funds it receives.");
    }
    if (in_p >= kFanWidth) {
      risk = true;
      std::snprintf(buf, sizeof buf, "Funds were collected from %.0f distinct sources in a fan-in aggregation pattern.",
                    in_p);
      s.emplace_back(buf);
    }
    if (out_p >= kFanWidth) {
      risk = true;
      std::snprintf(buf, sizeof buf,
                    "Funds were dispersed to %.0f distinct destinations in a fan-out distribution pattern.", out_p);
      s.emplace_back(buf);
    }
    const bool burst = tx >= kBurstCount && hours <= kBurstHours;
    if (burst) {
      risk = true;
      std::snprintf(buf, sizeof buf, "A burst of %.0f transfers occurred within a short window of %.1f hours.", tx,
                    hours);
      s.emplace_back(buf);
    }
    if (in > 0 && out > 0 && out / in >= 0.8 && out / in <= 1.25 && hours <= kRelayHours) {
      risk = true;
      std::snprintf(buf, sizeof buf,
                    "Funds were relayed rapidly, with inflow and outflow nearly balanced within %.1f hours.", hours);
      s.emplace_back(buf);
    }
    const double per_day = tx / std::max(days, 1.0 / 24.0);
    if (!burst && tx >= kBurstCount && per_day > kHighFrequencyPerDay) {
      risk = true;
      std::snprintf(buf, sizeof buf, "Transaction frequency is high at %.1f transfers per day.", per_day);
      s.emplace_back(buf);
    }
    std::snprintf(buf, sizeof buf, "Total inflow was %.4f and total outflow was %.4f units.", in, out);
    s.emplace_back(buf);
    if (fee > 0) {
      std::snprintf(buf, sizeof buf, "Total gas expenditure amounted to %.6f units.", fee);
      s.emplace_back(buf);
    }
    if (!risk) s.emplace_back("Transfer amounts remained small and stable over the observed period.");
    std::string key;
    for (const auto& [k, v] : kv) key += k + "=" + v + ";";
    if (mix64(fnv1a64(key)) % 3 == 0) s.emplace_back("Transactions appear to occur mostly during business hours.");

    std::string text;
    for (std::size_t i = 0; i < s.size(); ++i) text += (i ? " " : "") + s[i];
    return text;
  }

 private:
  std::atomic<std::size_t> calls_{0};
};

// Splits on terminal punctuation followed by whitespace or end of text.
inline std::vector<std::string> segment_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    cur.push_back(text[i]);
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      auto t = trim(cur);
      if (!t.empty()) out.push_back(std::move(t));
      cur.clear();
    }
  }
  auto t = trim(cur);
  if (!t.empty()) out.push_back(std::move(t));
  return out;
}

inline std::string join_sentences(const std::vector<std::string>& sentences) {
  std::string s;
  for (std::size_t i = 0; i < sentences.size(); ++i) s += (i ? " " : "") + sentences[i];
  return s;
}

struct TransactionSummary {
  std::string account;
  std::string text;  // sentences joined by single spaces
  std::vector<std::string> sentences;
  std::string backend_tag;
  std::string cache_key;
};

// ---------------------------------------------------------------------------
// Evidence store
// ---------------------------------------------------------------------------

struct EvidenceRecord {
  std::string cache_key;
  std::string account;
  std::string text;
  std::vector<std::string> sentences;
  std::string backend_tag;
  std::int64_t created_at = 0;

  bool same_content(const EvidenceRecord& o) const {
    return cache_key == o.cache_key && text == o.text && sentences == o.sentences && backend_tag == o.backend_tag;
  }
};

// Content-addressed, write-once summary cache persisted as line-delimited JSON
// sorted by key. Safe under concurrent writers: first write wins and a second
// write must carry identical content.
class EvidenceStore {
 public:
  EvidenceStore() = default;
  explicit EvidenceStore(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) load(read_file(path_));
  }

  std::optional<EvidenceRecord> find(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = records_.find(key);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  void put(const EvidenceRecord& rec) {
    std::lock_guard lock(mu_);
    auto [it, inserted] = records_.emplace(rec.cache_key, rec);
    if (!inserted && !it->second.same_content(rec))
      throw DataError("evidence store already holds different content for key " + rec.cache_key);
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return records_.size();
  }

  std::vector<EvidenceRecord> records() const {
    std::lock_guard lock(mu_);
    std::vector<EvidenceRecord> out;
    for (const auto& [_, r] : records_) out.push_back(r);
    return out;
  }

  std::string to_jsonl() const {
    std::lock_guard lock(mu_);
    std::string out;
    for (const auto& [_, r] : records_) {
      nlohmann::json j{{"cache_key", r.cache_key},   {"account", r.account},
                       {"text", r.text},             {"sentences", r.sentences},
                       {"backend_tag", r.backend_tag}, {"created_at", r.created_at}};
      out += j.dump() + "\n";
    }
    return out;
  }

  void flush() const {
    if (!path_.empty()) write_file_atomic(path_, to_jsonl());
  }

  void load(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        EvidenceRecord r{j.at("cache_key").get<std::string>(), j.at("account").get<std::string>(),
                         j.at("text").get<std::string>(),      j.at("sentences").get<std::vector<std::string>>(),
                         j.at("backend_tag").get<std::string>(), j.at("created_at").get<std::int64_t>()};
        put(r);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed evidence record: ") + e.what());
      }
    }
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, EvidenceRecord> records_;
};

using Clock = std::function<std::int64_t()>;

inline std::int64_t wall_clock_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

struct SummarizeOptions {
  std::string model = "forensic-analyst";
  int max_tokens = 512;
  double temperature = 0.0;
  Clock clock = wall_clock_seconds;
};

// Provenance reference stored instead of the raw account identifier, so the
// cache itself never holds an address.
inline std::string account_ref(const std::string& account) { return "acct:" + content_digest(account).substr(0, 16); }

inline TransactionSummary summary_from_record(const EvidenceRecord& r, const std::string& account) {
  return {account, r.text, r.sentences, r.backend_tag, r.cache_key};
}

// Serves from the evidence store on a key hit; otherwise calls the backend,
// segments the reply into sentences and persists it.
inline TransactionSummary summarize_account(const ForensicPrompt& prompt, const std::string& account,
                                            Summarizer& backend, EvidenceStore& store,
                                            const SummarizeOptions& opt = {},
                                            const RedactionPolicy& redaction = RedactionPolicy{}) {
  if (auto hit = store.find(prompt.cache_key)) return summary_from_record(*hit, account);
  Completion c = backend.complete({opt.model, prompt.text, opt.max_tokens, opt.temperature, false});
  auto sentences = segment_sentences(c.text);
  if (sentences.empty()) throw DataError("summarizer returned an empty summary");
  EvidenceRecord rec{prompt.cache_key, account_ref(account), join_sentences(sentences), sentences, backend.tag(), opt.clock()};
  redaction.require_clean(rec.text, "generated summary");
  store.put(rec);
  return summary_from_record(*store.find(prompt.cache_key), account);
}

// Summarizes many accounts with at most `max_in_flight` concurrent backend
// requests. Accounts whose prompts share a cache key trigger one call.
inline std::vector<TransactionSummary> summarize_accounts(const std::vector<ForensicPrompt>& prompts,
                                                          const std::vector<std::string>& accounts,
                                                          Summarizer& backend, EvidenceStore& store,
                                                          unsigned max_in_flight = 4,
                                                          const SummarizeOptions& opt = {},
                                                          const RedactionPolicy& redaction = RedactionPolicy{}) {
  if (prompts.size() != accounts.size()) throw ShapeError("prompts and accounts differ in length");
  std::map<std::string, std::size_t> first_for_key;
  std::vector<std::size_t> unique;
  for (std::size_t i = 0; i < prompts.size(); ++i)
    if (first_for_key.emplace(prompts[i].cache_key, i).second) unique.push_back(i);

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      std::size_t k = next.fetch_add(1);
      if (k >= unique.size()) return;
      {
        std::lock_guard lock(err_mu);
        if (first_error) return;
      }
      try {
        summarize_account(prompts[unique[k]], accounts[unique[k]], backend, store, opt, redaction);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(max_in_flight, static_cast<unsigned>(unique.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<TransactionSummary> out;
  out.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) out.push_back(summary_from_record(*store.find(prompts[i].cache_key), accounts[i]));
  return out;
}

}  // namespace fraudgraph
