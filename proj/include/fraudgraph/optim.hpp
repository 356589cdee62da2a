#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fraudgraph/common.hpp"

namespace fraudgraph {

// Adaptive-moment update with decoupled weight decay:
//   theta <- theta - lr * wd * theta
//   m <- b1 m + (1 - b1) g,   v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  AdamW() = default;
  explicit AdamW(Options o) : opt_(o) {
    if (!(opt_.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(opt_.weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  }

  const Options& options() const { return opt_; }
  long step_count() const { return t_; }

  void step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads) {
    if (params.size() != grads.size()) throw ShapeError("optimizer: parameter/gradient block count mismatch");
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw ShapeError("optimizer: parameter layout changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t b = 0; b < params.size(); ++b) {
      auto p = params[b];
      auto g = grads[b];
      if (p.size() != g.size() || p.size() != m_[b].size()) throw ShapeError("optimizer: block size mismatch");
      auto& m = m_[b];
      auto& v = v_[b];
      for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] -= opt_.lr * opt_.weight_decay * p[i];
        m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
        v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
        p[i] -= opt_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opt_.eps);
      }
    }
  }

 private:
  Options opt_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// ---------------------------------------------------------------------------
// REINFORCE pieces
// ---------------------------------------------------------------------------

inline double reward_from_loss(double loss) {
  if (!std::isfinite(loss)) throw NumericError("loss is not finite");
  if (loss < 0.0) throw DomainError("loss must be non-negative");
  return std::exp(-loss);
}

// Exponential moving average of rewards. The first observation seeds b.
struct BaselineState {
  double b = 0.0;
  long step = 0;
  double momentum = 0.9;

  // Advantage against the pre-update baseline.
  double advantage(double reward) const { return step == 0 ? 0.0 : reward - b; }
};

inline BaselineState update_baseline(BaselineState s, double reward) {
  if (!(reward > 0.0 && reward <= 1.0)) throw DomainError("reward must lie in (0, 1]");
  if (!(s.momentum >= 0.0 && s.momentum < 1.0)) throw ConfigError("baseline momentum must lie in [0, 1)");
  s.b = s.step == 0 ? reward : s.momentum * s.b + (1.0 - s.momentum) * reward;
  ++s.step;
  if (!std::isfinite(s.b)) throw NumericError("baseline diverged");
  return s;
}

// L_RL = -A (log p_disc + log p_resi); the advantage is a constant.
inline double reinforce_objective(double advantage, double logp_disc, double logp_resi) {
  if (logp_disc > 0.0 || logp_resi > 0.0) throw DomainError("log-probabilities must be <= 0");
  return -advantage * (logp_disc + logp_resi);
}

}  // namespace fraudgraph
