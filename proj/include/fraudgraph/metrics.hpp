#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fraudgraph/common.hpp"

namespace fraudgraph {

struct ScoredNode {
  std::string account;
  int label = 0;  // 1 = fraud (positive class)
  double probability = 0.0;
};

struct ScoreSet {
  std::vector<ScoredNode> scores;
  double threshold = 0.5;

  void validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
    for (const auto& s : scores) {
      if (s.label != 0 && s.label != 1) throw DataError("label of '" + s.account + "' is not 0/1");
      if (!(s.probability >= 0.0 && s.probability <= 1.0))
        throw DataError("probability of '" + s.account + "' is outside [0, 1]");
    }
  }
};

inline constexpr std::size_t kHistogramBins = 10;

struct EvalReport {
  std::optional<double> precision, recall, f1, auc, ks;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t n_fraud = 0, n_benign = 0;
  double threshold = 0.5;
  std::array<std::size_t, kHistogramBins> hist_fraud{};
  std::array<std::size_t, kHistogramBins> hist_benign{};

  bool both_classes() const { return n_fraud > 0 && n_benign > 0; }
};

// Mann-Whitney AUC: average ranks over tied scores, i.e. half credit per tied
// (fraud, benign) pair.
inline double auc_rank(const std::vector<double>& fraud, const std::vector<double>& benign) {
  std::vector<std::pair<double, int>> all;
  all.reserve(fraud.size() + benign.size());
  for (double x : fraud) all.emplace_back(x, 1);
  for (double x : benign) all.emplace_back(x, 0);
  std::sort(all.begin(), all.end());
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    std::size_t pos = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      pos += static_cast<std::size_t>(all[j].second);
      ++j;
    }
    // ranks i+1 .. j share the average (i + 1 + j) / 2
    rank_sum += static_cast<double>(pos) * (static_cast<double>(i + 1 + j) / 2.0);
    i = j;
  }
  const double np = static_cast<double>(fraud.size()), nn = static_cast<double>(benign.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

// Largest gap between the two classes' empirical score CDFs, checked at
// every distinct score.
inline double ks_statistic(std::vector<double> fraud, std::vector<double> benign) {
  std::sort(fraud.begin(), fraud.end());
  std::sort(benign.begin(), benign.end());
  std::vector<double> xs = fraud;
  xs.insert(xs.end(), benign.begin(), benign.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  double best = 0.0;
  std::size_t a = 0, b = 0;
  for (double x : xs) {
    while (a < fraud.size() && fraud[a] <= x) ++a;
    while (b < benign.size() && benign[b] <= x) ++b;
    const double gap = std::abs(static_cast<double>(a) / static_cast<double>(fraud.size()) -
                                static_cast<double>(b) / static_cast<double>(benign.size()));
    best = std::max(best, gap);
  }
  return best;
}

inline EvalReport compute_metrics(const ScoreSet& set) {
  if (set.scores.empty()) throw DataError("score set is empty");
  set.validate();
  EvalReport r;
  r.threshold = set.threshold;
  std::vector<double> fraud, benign;
  for (const auto& s : set.scores) {
    const bool pred = s.probability >= set.threshold;
    const std::size_t bin = std::min(kHistogramBins - 1, static_cast<std::size_t>(s.probability * kHistogramBins));
    if (s.label == 1) {
      fraud.push_back(s.probability);
      ++r.hist_fraud[bin];
      pred ? ++r.tp : ++r.fn;
    } else {
      benign.push_back(s.probability);
      ++r.hist_benign[bin];
      pred ? ++r.fp : ++r.tn;
    }
  }
  r.n_fraud = fraud.size();
  r.n_benign = benign.size();
  if (r.tp + r.fp > 0) r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  if (r.tp + r.fn > 0) r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  if (r.precision && r.recall) {
    const double s = *r.precision + *r.recall;
    r.f1 = s > 0.0 ? 2.0 * *r.precision * *r.recall / s : 0.0;
  }
  if (r.both_classes()) {
    r.auc = auc_rank(fraud, benign);
    r.ks = ks_statistic(fraud, benign);
  }
  return r;
}

inline std::string report_to_csv(const EvalReport& r) {
  std::ostringstream os;
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
  os << "metric,value\n"
     << "precision," << opt(r.precision) << "\n"
     << "recall," << opt(r.recall) << "\n"
     << "f1," << opt(r.f1) << "\n"
     << "auc," << opt(r.auc) << "\n"
     << "ks," << opt(r.ks) << "\n"
     << "threshold," << format_double(r.threshold) << "\n"
     << "tp," << r.tp << "\n"
     << "fp," << r.fp << "\n"
     << "tn," << r.tn << "\n"
     << "fn," << r.fn << "\n"
     << "n_fraud," << r.n_fraud << "\n"
     << "n_benign," << r.n_benign << "\n";
  for (std::size_t b = 0; b < kHistogramBins; ++b) os << "hist_fraud_" << b << "," << r.hist_fraud[b] << "\n";
  for (std::size_t b = 0; b < kHistogramBins; ++b) os << "hist_benign_" << b << "," << r.hist_benign[b] << "\n";
  return os.str();
}

// Scores file: CSV (account,label,probability) with a header row.
inline std::string scores_to_csv(const ScoreSet& set) {
  std::string out = "account,label,probability\n";
  for (const auto& s : set.scores) out += s.account + "," + std::to_string(s.label) + "," + format_double(s.probability) + "\n";
  return out;
}

inline ScoreSet scores_from_csv(std::istream& in) {
  ScoreSet set;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto row = split_csv_line(line);
    if (first) {
      first = false;
      if (row.size() >= 3 && row[1] == "label") continue;
    }
    if (row.size() != 3) throw DataError("scores row must have 3 columns: '" + line + "'");
    try {
      std::size_t p1 = 0, p2 = 0;
      int label = std::stoi(row[1], &p1);
      double prob = std::stod(row[2], &p2);
      if (p1 != row[1].size() || p2 != row[2].size()) throw std::invalid_argument("trailing");
      set.scores.push_back({row[0], label, prob});
    } catch (const std::exception&) {
      throw DataError("malformed scores row: '" + line + "'");
    }
  }
  return set;
}

}  // namespace fraudgraph
