#pragma once

#include <string>
#include <vector>

#include "fraudgraph/ingest.hpp"

namespace fgtest {

// Generic-chain transfer; `amount` in native units (8 decimals).
inline fraudgraph::RawTransaction tx(const std::string& id, const std::string& from, const std::string& to,
                                     const std::string& amount, std::int64_t ts = 0,
                                     fraudgraph::TxStatus status = fraudgraph::TxStatus::success) {
  fraudgraph::RawTransaction t;
  t.chain = fraudgraph::Chain::generic;
  t.tx_id = id;
  t.from_account = from;
  t.to_account = to;
  t.amount = fraudgraph::Amount::parse(amount, 8);
  t.timestamp = ts;
  t.status = status;
  return t;
}

inline fraudgraph::TransactionGraph graph_of(const std::vector<fraudgraph::RawTransaction>& txs) {
  return fraudgraph::ingest_records(txs, fraudgraph::Chain::generic).graph;
}

}  // namespace fgtest
