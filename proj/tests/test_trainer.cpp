#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "fraudgraph/trainer.hpp"
#include "helpers.hpp"

using namespace fraudgraph;
using fgtest::tx;

namespace {

// Eight accounts in a ring with chords; fraud summaries use risk wording.
struct World {
  TransactionGraph g;
  std::unique_ptr<SummaryCorpus> corpus;
  std::vector<TrainingSample> samples;
  std::vector<const TrainingSample*> train, val;

  World() {
    std::vector<RawTransaction> txs;
    for (int i = 0; i < 8; ++i) {
      txs.push_back(tx("r" + std::to_string(i), "a" + std::to_string(i), "a" + std::to_string((i + 1) % 8), "1", i));
      txs.push_back(tx("c" + std::to_string(i), "a" + std::to_string(i), "a" + std::to_string((i + 3) % 8), "2", i));
    }
    g = fgtest::graph_of(txs);
    corpus = std::make_unique<SummaryCorpus>(TextEmbedder(32, 3));
    for (int i = 0; i < 8; ++i) {
      const NodeId v = g.id("a" + std::to_string(i));
      const bool fraud = i % 2 == 0;
      g.set_label(v, fraud ? Label::fraud : Label::benign);
      if (fraud)
        corpus->add(v, {"A burst of 14 transfers occurred within a short window.",
                        "Funds were dispersed to 9 distinct destinations in a fan-out distribution pattern.",
                        "Transactions appear to occur mostly during business hours."});
      else
        corpus->add(v, {"The account executed 3 transactions with 2 unique partners over 40 days.",
                        "Transfer amounts remained small and stable over the observed period."});
    }
    for (int i = 0; i < 8; ++i) {
      const NodeId v = g.id("a" + std::to_string(i));
      samples.push_back(make_sample(build_subgraph(g, v, SamplingConfig{}), i % 2 == 0 ? 1 : 0));
    }
    for (std::size_t i = 0; i < samples.size(); ++i) (i < 6 ? train : val).push_back(&samples[i]);
  }
};

TrainConfig quick_config() {
  TrainConfig c;
  c.inner_epochs = 3;
  c.early_stop_patience = 0;
  c.lr_policy = 1e-2;
  c.lr_gnn = 1e-2;
  return c;
}

TrainHooks fixed_clock_hooks() {
  TrainHooks h;
  h.clock = [] { return std::int64_t{42}; };
  return h;
}

}  // namespace

TEST(Reinforce, RewardOfUnitLoss) {
  EXPECT_DOUBLE_EQ(reward_from_loss(1.0), 0.36787944117144233);
  EXPECT_DOUBLE_EQ(reward_from_loss(0.0), 1.0);
  EXPECT_THROW(reward_from_loss(-0.1), DomainError);
  EXPECT_THROW(reward_from_loss(std::nan("")), NumericError);
}

TEST(Reinforce, BaselineSeedsThenSmooths) {
  BaselineState b;
  EXPECT_EQ(b.advantage(0.5), 0.0);
  b = update_baseline(b, 0.5);
  EXPECT_DOUBLE_EQ(b.b, 0.5);
  EXPECT_DOUBLE_EQ(b.advantage(1.0), 0.5);
  b = update_baseline(b, 1.0);
  EXPECT_NEAR(b.b, 0.55, 1e-15);
  EXPECT_EQ(b.step, 2);
  EXPECT_THROW(update_baseline(b, 0.0), DomainError);
  EXPECT_THROW(update_baseline(b, 1.5), DomainError);
  b.momentum = 1.0;
  EXPECT_THROW(update_baseline(b, 0.5), ConfigError);
}

TEST(Reinforce, Objective) {
  EXPECT_DOUBLE_EQ(reinforce_objective(0.5, -1.0, -2.0), 1.5);
  EXPECT_DOUBLE_EQ(reinforce_objective(-0.5, -1.0, -2.0), -1.5);
  EXPECT_THROW(reinforce_objective(0.5, 0.1, -2.0), DomainError);
}

TEST(AdamW, ClosedFormSteps) {
  AdamW opt({0.1, 0.9, 0.999, 1e-8, 0.01});
  std::vector<double> p{1.0, -2.0}, g{0.5, -4.0};
  opt.step({std::span<double>(p)}, {std::span<const double>(g)});
  // Bias-corrected moments equal g and g^2 on the first step.
  const double p0 = 1.0 * (1 - 0.1 * 0.01) - 0.1 * 0.5 / (0.5 + 1e-8);
  const double p1 = -2.0 * (1 - 0.1 * 0.01) - 0.1 * -4.0 / (4.0 + 1e-8);
  EXPECT_NEAR(p[0], p0, 1e-12);
  EXPECT_NEAR(p[1], p1, 1e-12);
  // A repeated gradient keeps the same corrected moments.
  opt.step({std::span<double>(p)}, {std::span<const double>(g)});
  EXPECT_NEAR(p[0], p0 * (1 - 0.001) - 0.1 * 0.5 / (0.5 + 1e-8), 1e-12);
  EXPECT_EQ(opt.step_count(), 2);
  std::vector<double> other(3);
  EXPECT_THROW(opt.step({std::span<double>(other)}, {std::span<const double>(g)}), ShapeError);
  EXPECT_THROW(AdamW({-1.0, 0.9, 0.999, 1e-8, 0.0}), ConfigError);
}

TEST(Corpus, MissingNodeAndEmptyResidual) {
  SummaryCorpus c(TextEmbedder(16));
  EXPECT_THROW(c.at(3), DataError);
  EXPECT_THROW(c.add(3, {}), DataError);
  c.add(3, {"One sentence."});
  EXPECT_TRUE(c.contains(3));
  SummarySplit s;
  s.disc_text = "One sentence.";
  auto v = embed_split(s, c.embedder());
  EXPECT_EQ(v.resi, std::vector<double>(16, 0.0));
}

TEST(Stage1, ZeroLearningRateKeepsPolicy) {
  World w;
  auto cfg = quick_config();
  cfg.lr_policy = 0.0;
  auto pt = make_policy_trainer(cfg);
  const auto before = pt.policy.digest();
  auto params = init_params(32, 1, 8);
  std::mt19937_64 rng(1);
  auto st = stage1_epoch(w.train, pt, params, *w.corpus, cfg, rng);
  EXPECT_EQ(st.steps, w.train.size());
  EXPECT_EQ(pt.policy.digest(), before);
  EXPECT_EQ(pt.baseline.step, static_cast<long>(w.train.size()));
  EXPECT_GT(st.mean_reward, 0.0);
  EXPECT_LE(st.mean_reward, 1.0);
}

TEST(Stage1, UpdatesPolicyButNotEncoder) {
  World w;
  auto cfg = quick_config();
  auto pt = make_policy_trainer(cfg);
  const auto before = pt.policy.digest();
  auto params = init_params(32, 1, 8);
  const auto pd = params.digest();
  std::mt19937_64 rng(1);
  stage1_epoch(w.train, pt, params, *w.corpus, cfg, rng);
  EXPECT_NE(pt.policy.digest(), before);
  EXPECT_EQ(params.digest(), pd);
}

TEST(Stage2, ZeroLearningRateKeepsParams) {
  World w;
  auto cfg = quick_config();
  cfg.lr_gnn = 0.0;
  auto params = init_params(32, 1, 8);
  const auto before = params.digest();
  AdamW opt({0.0, 0.9, 0.999, 1e-8, 0.0});
  auto views = deterministic_views(w.train, *w.corpus, SplitPolicy{});
  std::mt19937_64 rng(2);
  auto st = stage2_epoch(w.train, views, params, opt, *w.corpus, cfg, rng);
  EXPECT_EQ(st.steps, w.train.size());
  EXPECT_EQ(params.digest(), before);
}

TEST(Stage2, OverfitsSingleSample) {
  World w;
  auto cfg = quick_config();
  std::vector<const TrainingSample*> one{w.train[0]};
  auto params = init_params(32, 5, 8);
  AdamW opt({1e-2, 0.9, 0.999, 1e-8, 0.0});
  auto views = deterministic_views(one, *w.corpus, SplitPolicy{});
  std::mt19937_64 rng(3);
  for (int e = 0; e < 300; ++e) stage2_epoch(one, views, params, opt, *w.corpus, cfg, rng);
  auto x = assemble_features(*one[0], *w.corpus, views);
  auto fs = forward_sample(x, one[0]->adjacency, center_row(*one[0]), params, one[0]->label, cfg.loss_weights());
  EXPECT_LT(fs.loss.disc, 0.01);
}

TEST(AlternateTrain, StagesFreezeTheOtherSide) {
  World w;
  auto cfg = quick_config();
  auto hooks = fixed_clock_hooks();
  int policy_stages = 0, encoder_stages = 0;
  hooks.on_stage = [&](const std::string& stage, const std::string& pb, const std::string& pa, const std::string& qb,
                       const std::string& qa) {
    if (stage == "policy") {
      ++policy_stages;
      EXPECT_EQ(pb, pa);
      EXPECT_NE(qb, qa);
    } else {
      ++encoder_stages;
      EXPECT_EQ(qb, qa);
      EXPECT_NE(pb, pa);
    }
  };
  auto r = alternate_train(w.train, w.val, *w.corpus, cfg, init_params(32, 1, 8), hooks);
  EXPECT_EQ(policy_stages, 2);
  EXPECT_EQ(encoder_stages, 6);
  EXPECT_EQ(r.log.size(), 8u);
  EXPECT_EQ(r.log[0].stage, "policy");
  EXPECT_TRUE(r.log[0].mean_reward.has_value());
  EXPECT_TRUE(r.log[1].val_f1.has_value());
  EXPECT_EQ(r.log[1].timestamp, 42);
  EXPECT_GE(r.best_val_f1, 0.0);
}

TEST(AlternateTrain, DeterministicUnderSeed) {
  World w;
  auto cfg = quick_config();
  auto a = alternate_train(w.train, w.val, *w.corpus, cfg, init_params(32, 1, 8), fixed_clock_hooks());
  auto b = alternate_train(w.train, w.val, *w.corpus, cfg, init_params(32, 1, 8), fixed_clock_hooks());
  EXPECT_EQ(a.log_jsonl(), b.log_jsonl());
  EXPECT_EQ(a.final_params.digest(), b.final_params.digest());
  EXPECT_EQ(a.final_policy.digest(), b.final_policy.digest());
  cfg.seed = 8;
  auto c = alternate_train(w.train, w.val, *w.corpus, cfg, init_params(32, 1, 8), fixed_clock_hooks());
  EXPECT_NE(a.final_policy.digest(), c.final_policy.digest());
}

TEST(AlternateTrain, EarlyStopAfterPatience) {
  World w;
  auto cfg = quick_config();
  cfg.inner_epochs = 10;
  cfg.lr_gnn = 0.0;  // validation F1 never moves
  cfg.early_stop_patience = 2;
  auto r = alternate_train(w.train, w.val, *w.corpus, cfg, init_params(32, 1, 8), fixed_clock_hooks());
  EXPECT_TRUE(r.stopped_early);
  ASSERT_EQ(r.log.size(), 4u);  // policy + encoder 1..3
  EXPECT_EQ(r.log.back().inner, 3);
  EXPECT_EQ(r.best_outer, 1);
  EXPECT_EQ(r.best_inner, 1);
}

TEST(AlternateTrain, DefaultScheduleLogCounts) {
  World w;
  TrainConfig cfg;
  cfg.early_stop_patience = 0;
  auto r = alternate_train(w.train, w.val, *w.corpus, cfg, init_params(32, 1, 8), fixed_clock_hooks());
  std::size_t policy = 0, encoder = 0;
  for (const auto& e : r.log) (e.stage == "policy" ? policy : encoder)++;
  EXPECT_EQ(policy, 2u);
  EXPECT_EQ(encoder, 20u);
  cfg.early_stop_patience = 5;
  auto s = alternate_train(w.train, w.val, *w.corpus, cfg, init_params(32, 1, 8), fixed_clock_hooks());
  EXPECT_LE(s.log.size(), 22u);
}

TEST(AlternateTrain, ZeroEpochsLeaveEverythingUnchanged) {
  World w;
  TrainConfig cfg;
  cfg.outer_epochs = 0;
  auto init = init_params(32, 1, 8);
  auto r = alternate_train(w.train, w.val, *w.corpus, cfg, init, fixed_clock_hooks());
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.final_params, init);
  EXPECT_EQ(r.final_policy.digest(), make_policy_trainer(cfg).policy.digest());
}

TEST(AlternateTrain, ConfigErrors) {
  World w;
  TrainConfig cfg;
  EXPECT_THROW(alternate_train(w.train, {}, *w.corpus, cfg, init_params(32, 1, 8)), ConfigError);
  EXPECT_THROW(alternate_train({}, w.val, *w.corpus, cfg, init_params(32, 1, 8)), ConfigError);
  cfg.ema_momentum = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lambda2 = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.inner_epochs = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(EpochLog, JsonLine) {
  EpochLog e{1, 0, "policy", 0.5, 0.6, std::nullopt, 99};
  auto j = nlohmann::json::parse(epoch_log_line(e));
  EXPECT_EQ(j["stage"], "policy");
  EXPECT_TRUE(j["val_f1"].is_null());
  EXPECT_EQ(j["timestamp"], 99);
}
