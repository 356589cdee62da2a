#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraudgraph/common.hpp"
#include "fraudgraph/ingest.hpp"

namespace fraudgraph {

enum class Motif { fan_in, fan_out, relay, burst };

inline const char* to_string(Motif m) {
  switch (m) {
    case Motif::fan_in: return "fan_in";
    case Motif::fan_out: return "fan_out";
    case Motif::relay: return "relay";
    case Motif::burst: return "burst";
  }
  return "?";
}

// Synthetic ethereum-schema corpus. Benign accounts trade small amounts with
// random benign partners over months; each fraud account is planted in one
// motif:
//   fan_in   >= fan_width benign sources within hours, then a quick sweep out
//   fan_out  one large deposit, then >= fan_width payouts within hours
//   relay    chain of up to 3 fraud accounts forwarding ~95% hop by hop
//   burst    >= burst_size transfers inside a few hours
// A share of benign accounts are hubs (merchant/exchange-like) that collect
// from many partners, but spread over months.
struct SynthConfig {
  std::size_t n_accounts = 2000;
  double fraud_ratio = 0.1;
  std::array<double, 4> motif_mix{0.3, 0.3, 0.2, 0.2};  // fan_in, fan_out, relay, burst
  std::size_t fan_width = 10;
  std::size_t burst_size = 12;
  std::size_t benign_tx_min = 2;
  std::size_t benign_tx_max = 6;
  double benign_amount_min = 0.01;  // ETH
  double benign_amount_max = 2.0;
  double fraud_amount_min = 0.5;
  double fraud_amount_max = 5.0;
  double horizon_days = 180.0;
  double zero_amount_rate = 0.01;
  double failed_rate = 0.01;
  double benign_hub_ratio = 0.02;
  std::uint64_t seed = 1;

  std::size_t fraud_count() const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n_accounts) * fraud_ratio));
  }

  void validate() const {
    if (!(fraud_ratio > 0.0 && fraud_ratio < 1.0)) throw ConfigError("fraud_ratio must lie in (0, 1)");
    if (fraud_count() == 0) throw ConfigError("fraud_ratio yields zero fraud accounts");
    if (fraud_count() >= n_accounts) throw ConfigError("fraud_ratio leaves no benign accounts");
    if (n_accounts - fraud_count() < fan_width + 2)
      throw ConfigError("too few benign accounts for the configured fan width");
    double total = 0.0;
    for (double w : motif_mix) {
      if (!(w >= 0.0)) throw ConfigError("motif weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw ConfigError("motif mix is all zero");
    if (fan_width == 0 || burst_size == 0) throw ConfigError("fan_width and burst_size must be positive");
    if (benign_tx_min == 0 || benign_tx_max < benign_tx_min) throw ConfigError("bad benign transaction range");
    if (!(benign_amount_min > 0 && benign_amount_max >= benign_amount_min)) throw ConfigError("bad benign amounts");
    if (!(fraud_amount_min > 0 && fraud_amount_max >= fraud_amount_min)) throw ConfigError("bad fraud amounts");
    if (!(horizon_days > 1.0)) throw ConfigError("horizon_days must exceed 1");
    if (!(benign_hub_ratio >= 0.0 && benign_hub_ratio < 1.0)) throw ConfigError("benign_hub_ratio must lie in [0, 1)");
    if (!(zero_amount_rate >= 0 && zero_amount_rate < 1 && failed_rate >= 0 && failed_rate < 1))
      throw ConfigError("noise rates must lie in [0, 1)");
  }
};

struct SynthResult {
  std::vector<RawTransaction> records;  // sorted by (timestamp, tx_id)
  std::vector<std::pair<std::string, int>> labels;  // sorted by account
  std::map<std::string, Motif> motifs;  // fraud account -> motif
};

namespace detail {

inline constexpr std::int64_t kSynthEpoch = 1'600'000'000;
inline constexpr double kWeiPerEth = 1e18;

inline std::string random_hex(std::mt19937_64& rng, std::size_t digits) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(digits);
  for (std::size_t i = 0; i < digits; ++i) s.push_back(kHex[uniform_index(rng, 16)]);
  return s;
}

inline Amount eth_to_wei(double eth) {
  // Whole gwei precision is plenty for synthetic values.
  const auto gwei = static_cast<std::int64_t>(std::llround(eth * 1e9));
  return Amount::from_base(static_cast<Amount::Rep>(gwei) * 1'000'000'000);
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

}  // namespace detail

inline SynthResult synthgen(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n_fraud = cfg.fraud_count();
  const std::size_t n_benign = cfg.n_accounts - n_fraud;

  std::vector<std::string> addr(cfg.n_accounts);
  {
    std::map<std::string, bool> seen;
    for (auto& a : addr) {
      do a = "0x" + detail::random_hex(rng, 40);
      while (!seen.emplace(a, true).second);
    }
  }
  // Accounts [0, n_benign) are benign, the rest fraud; the address order is
  // random so the labels carry no lexicographic signal.
  const auto benign = [&](std::size_t i) -> const std::string& { return addr[i]; };
  const auto fraud = [&](std::size_t i) -> const std::string& { return addr[n_benign + i]; };

  SynthResult out;
  std::uint64_t counter = 0;
  const std::int64_t horizon = static_cast<std::int64_t>(cfg.horizon_days * 86400.0);
  auto next_tx_id = [&] {
    ++counter;
    return "0x" + hex64(mix64(cfg.seed ^ mix64(counter))) + hex64(mix64(counter * 0x9e3779b97f4a7c15ULL)) +
           hex64(mix64(counter ^ 0xabcdefULL)) + hex64(mix64(cfg.seed + counter));
  };
  auto emit = [&](const std::string& from, const std::string& to, double eth, std::int64_t ts) {
    RawTransaction t;
    t.chain = Chain::ethereum;
    t.tx_id = next_tx_id();
    t.from_account = from;
    t.to_account = to;
    t.amount = detail::eth_to_wei(eth);
    t.timestamp = detail::kSynthEpoch + std::clamp<std::int64_t>(ts, 0, horizon);
    // 21k gas at 20-60 gwei
    t.fee = Amount::from_base(static_cast<Amount::Rep>(21000) * (20 + uniform_index(rng, 41)) * 1'000'000'000);
    out.records.push_back(std::move(t));
  };
  auto random_benign = [&](std::size_t exclude) {
    std::size_t j;
    do j = uniform_index(rng, n_benign);
    while (j == exclude);
    return j;
  };
  auto distinct_benign = [&](std::size_t k) {
    std::vector<std::size_t> idx(n_benign);
    for (std::size_t i = 0; i < n_benign; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n_benign - i)]);
    idx.resize(k);
    return idx;
  };

  // Benign background activity.
  for (std::size_t i = 0; i < n_benign; ++i) {
    const std::size_t k = cfg.benign_tx_min + uniform_index(rng, cfg.benign_tx_max - cfg.benign_tx_min + 1);
    for (std::size_t t = 0; t < k; ++t) {
      // Draws are sequenced explicitly; argument evaluation order is unspecified.
      const std::size_t to = random_benign(i);
      const double eth = detail::uniform_real(rng, cfg.benign_amount_min, cfg.benign_amount_max);
      const auto ts = static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(horizon));
      emit(benign(i), benign(to), eth, ts);
    }
  }

  // Hubs: deposits from 1.5x fan_width distinct benign payers, periodic payouts.
  const auto n_hubs = static_cast<std::size_t>(std::floor(static_cast<double>(n_benign) * cfg.benign_hub_ratio));
  for (std::size_t h = 0; h < n_hubs; ++h) {
    const std::size_t hub = uniform_index(rng, n_benign);
    for (std::size_t s : distinct_benign(cfg.fan_width + cfg.fan_width / 2)) {
      if (s == hub) continue;
      const double eth = detail::uniform_real(rng, cfg.benign_amount_min, cfg.benign_amount_max);
      const auto ts = static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(horizon));
      emit(benign(s), benign(hub), eth, ts);
    }
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t to = random_benign(hub);
      const double eth = detail::uniform_real(rng, cfg.benign_amount_min, cfg.benign_amount_max) * 4.0;
      const auto ts = static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(horizon));
      emit(benign(hub), benign(to), eth, ts);
    }
  }

  // Fraud motifs.
  double mix_total = 0.0;
  for (double w : cfg.motif_mix) mix_total += w;
  auto draw_motif = [&] {
    double u = uniform01(rng) * mix_total;
    for (std::size_t m = 0; m < 4; ++m) {
      if (u < cfg.motif_mix[m]) return static_cast<Motif>(m);
      u -= cfg.motif_mix[m];
    }
    return Motif::burst;
  };
  const auto hours = [](double h) { return static_cast<std::int64_t>(h * 3600.0); };
  const std::int64_t latest_start = horizon - hours(96);
  auto window_start = [&] { return static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(latest_start)); };

  std::size_t f = 0;
  while (f < n_fraud) {
    const Motif m = draw_motif();
    const std::int64_t t0 = window_start();
    switch (m) {
      case Motif::fan_in: {
        const auto& acct = fraud(f);
        double collected = 0.0;
        for (std::size_t s : distinct_benign(cfg.fan_width)) {
          const double eth = detail::uniform_real(rng, cfg.fraud_amount_min, cfg.fraud_amount_max);
          collected += eth;
          emit(benign(s), acct, eth, t0 + hours(uniform01(rng) * 12.0));
        }
        const std::size_t sweeps = 2 + uniform_index(rng, 2);
        for (std::size_t s = 0; s < sweeps; ++s) {
          const std::size_t to = random_benign(n_benign);
          emit(acct, benign(to), 0.9 * collected / static_cast<double>(sweeps), t0 + hours(12.0 + uniform01(rng) * 6.0));
        }
        out.motifs[acct] = m;
        ++f;
        break;
      }
      case Motif::fan_out: {
        const auto& acct = fraud(f);
        const double deposit = detail::uniform_real(rng, cfg.fraud_amount_min, cfg.fraud_amount_max) *
                               static_cast<double>(cfg.fan_width);
        emit(benign(random_benign(n_benign)), acct, deposit, t0);
        for (std::size_t d : distinct_benign(cfg.fan_width))
          emit(acct, benign(d), 0.95 * deposit / static_cast<double>(cfg.fan_width),
               t0 + hours(1.0 + uniform01(rng) * 11.0));
        out.motifs[acct] = m;
        ++f;
        break;
      }
      case Motif::relay: {
        const std::size_t len = std::min<std::size_t>(3, n_fraud - f);
        double eth = detail::uniform_real(rng, cfg.fraud_amount_min, cfg.fraud_amount_max) * 4.0;
        std::int64_t t = t0;
        emit(benign(random_benign(n_benign)), fraud(f), eth, t);
        for (std::size_t h = 0; h < len; ++h) {
          t += hours(1.0 + uniform01(rng) * 5.0);
          eth *= 0.95;
          const std::string& next = h + 1 < len ? fraud(f + h + 1) : benign(random_benign(n_benign));
          emit(fraud(f + h), next, eth, t);
          out.motifs[fraud(f + h)] = m;
        }
        f += len;
        break;
      }
      case Motif::burst: {
        const auto& acct = fraud(f);
        const double seed_eth = detail::uniform_real(rng, cfg.fraud_amount_min, cfg.fraud_amount_max);
        emit(benign(random_benign(n_benign)), acct, seed_eth, t0);
        for (std::size_t k = 0; k < cfg.burst_size; ++k) {
          const std::size_t to = random_benign(n_benign);
          emit(acct, benign(to), seed_eth / static_cast<double>(cfg.burst_size + 2), t0 + hours(0.5 + uniform01(rng) * 5.5));
        }
        out.motifs[acct] = m;
        ++f;
        break;
      }
    }
  }

  // Noise records that ingestion must drop.
  const std::size_t base = out.records.size();
  for (std::size_t i = 0; i < base; ++i) {
    const double u = uniform01(rng);
    if (u < cfg.zero_amount_rate) {
      RawTransaction t = out.records[i];
      t.tx_id = next_tx_id();
      t.amount = Amount{};
      out.records.push_back(std::move(t));
    } else if (u < cfg.zero_amount_rate + cfg.failed_rate) {
      RawTransaction t = out.records[i];
      t.tx_id = next_tx_id();
      t.status = TxStatus::failed;
      out.records.push_back(std::move(t));
    }
  }
  std::sort(out.records.begin(), out.records.end(), [](const RawTransaction& a, const RawTransaction& b) {
    return std::tie(a.timestamp, a.tx_id) < std::tie(b.timestamp, b.tx_id);
  });

  for (std::size_t i = 0; i < n_benign; ++i) out.labels.emplace_back(benign(i), 0);
  for (std::size_t i = 0; i < n_fraud; ++i) out.labels.emplace_back(fraud(i), 1);
  std::sort(out.labels.begin(), out.labels.end());
  return out;
}

inline std::string synth_records_jsonl(const SynthResult& r) {
  std::string s;
  for (const auto& t : r.records) {
    nlohmann::ordered_json j{{"tx_id", t.tx_id},
                             {"from", t.from_account},
                             {"to", t.to_account},
                             {"value_wei", t.amount.to_string()},
                             {"timestamp", t.timestamp},
                             {"gas_fee", t.fee ? t.fee->to_string() : std::string("0")},
                             {"status", t.status == TxStatus::failed ? "failed" : "success"}};
    s += j.dump() + "\n";
  }
  return s;
}

inline std::string synth_labels_csv(const SynthResult& r) {
  std::string s = "account,label\n";
  for (const auto& [a, l] : r.labels) s += a + "," + std::to_string(l) + "\n";
  return s;
}

// Ingested and labelled graph of a synthetic corpus.
inline TransactionGraph synth_graph(const SynthResult& r) {
  auto ing = ingest_records(r.records, Chain::ethereum);
  return attach_labels(std::move(ing.graph), r.labels).graph;
}

}  // namespace fraudgraph
