#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fraudgraph/common.hpp"
#include "fraudgraph/split_policy.hpp"

namespace fraudgraph {

enum class EmbedderBackend { hash, external };

// Fixed text encoder: signed feature hashing of word unigrams and bigrams
// into `dim` buckets, then L2 normalisation.
class TextEmbedder {
 public:
  explicit TextEmbedder(std::size_t dim = 256, std::uint64_t seed = 0x5eed, EmbedderBackend backend = EmbedderBackend::hash)
      : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
    if (backend != EmbedderBackend::hash)
      throw ConfigError("only the hash embedding backend is available in this build");
  }

  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<double> embed(const std::string& text) const {
    if (trim(text).empty()) throw DataError("cannot embed empty text");
    std::vector<double> v(dim_, 0.0);
    auto tokens = tokenize(text);
    auto add = [&](const std::string& feature) {
      const std::uint64_t h = mix64(fnv1a64(feature, seed_ ^ 0xcbf29ce484222325ULL));
      v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      add("u:" + tokens[i]);
      if (i + 1 < tokens.size()) add("b:" + tokens[i] + " " + tokens[i + 1]);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm == 0.0) {
      // Punctuation-only text or exact sign cancellation.
      v[mix64(fnv1a64(text, seed_)) % dim_] = 1.0;
      return v;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace fraudgraph
