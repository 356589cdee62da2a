#include <gtest/gtest.h>

#include "fraudgraph/pipeline.hpp"
#include "helpers.hpp"

using namespace fraudgraph;
using fgtest::tx;

namespace {

Clock fixed_clock() {
  return [] { return std::int64_t{1700000000}; };
}

}  // namespace

TEST(Config, ParsesKeysAndComments) {
  auto c = parse_config(
      "# run settings\n"
      "outer_epochs = 3\n"
      "lr_policy=1e-4   # policy\n"
      "\n"
      "hops = 1\n"
      "neighbors_per_hop = 5\n"
      "n_accounts = 500\n"
      "motif_relay = 0.5\n"
      "model = analyst-x\n"
      "seed = 99\n");
  EXPECT_EQ(c.train.outer_epochs, 3);
  EXPECT_DOUBLE_EQ(c.train.lr_policy, 1e-4);
  EXPECT_EQ(c.sampling.hops, 1);
  EXPECT_EQ(c.sampling.neighbors_per_hop, 5);
  EXPECT_EQ(c.synth.n_accounts, 500u);
  EXPECT_DOUBLE_EQ(c.synth.motif_mix[2], 0.5);
  EXPECT_EQ(c.model, "analyst-x");
  EXPECT_EQ(c.seed(), 99u);
  EXPECT_EQ(c.synth.seed, 99u);
}

TEST(Config, DefaultsMatchPublishedSettings) {
  PipelineConfig c;
  EXPECT_EQ(c.sampling.neighbors_per_hop, 10);
  EXPECT_EQ(c.sampling.hops, 2);
  EXPECT_DOUBLE_EQ(c.sampling.beta, 2.0);
  EXPECT_EQ(c.sampling.budget, 10u);
  EXPECT_DOUBLE_EQ(c.train.lambda1, 0.05);
  EXPECT_DOUBLE_EQ(c.train.lambda2, 0.3);
  EXPECT_EQ(c.train.outer_epochs, 2);
  EXPECT_EQ(c.train.inner_epochs, 10);
  EXPECT_DOUBLE_EQ(c.train.lr_policy, 5e-6);
  EXPECT_EQ(c.hidden, 64u);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("outer_epochs\n"), ConfigError);
  EXPECT_THROW(parse_config("outer_epochs = two\n"), ConfigError);
  EXPECT_THROW(parse_config("lr_gnn = 0.1x\n"), ConfigError);
  EXPECT_THROW(parse_config("= 3\n"), ConfigError);
  auto c = parse_config("threshold = 1.5\n");
  EXPECT_THROW(validate(c), ConfigError);
  c = parse_config("beta = -1\n");
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Splits, JsonRoundTripByAccountName) {
  auto g = fgtest::graph_of({tx("1", "a", "b", "1"), tx("2", "c", "d", "1")});
  DatasetSplits s{{g.id("a"), g.id("d")}, {g.id("b")}, {g.id("c")}};
  auto j = splits_to_json(s, g);
  EXPECT_EQ(j["val"][0], "b");
  auto back = splits_from_json(nlohmann::json::parse(j.dump()), g);
  EXPECT_EQ(back.train, s.train);
  EXPECT_EQ(back.val, s.val);
  EXPECT_EQ(back.test, s.test);
  j["test"] = {"zz"};
  EXPECT_THROW(splits_from_json(j, g), NotFoundError);
  EXPECT_THROW(splits_from_json(nlohmann::json{{"train", 3}}, g), DataError);
}

TEST(Summaries, MissingSummaryNamesTheAccount) {
  auto g = fgtest::graph_of({tx("1", "alpha", "beta", "1", 5), tx("2", "gamma", "beta", "3", 9)});
  PipelineConfig cfg;
  cfg.embed_dim = 16;
  MockSummarizer mock;
  EvidenceStore store;
  summarize_nodes(g, {g.id("alpha")}, mock, store, cfg, fixed_clock());
  try {
    corpus_from_store(g, {g.id("alpha"), g.id("gamma")}, store, cfg);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("1 node(s)"), std::string::npos) << e.what();
  }
  auto corpus = corpus_from_store(g, {g.id("alpha")}, store, cfg);
  EXPECT_EQ(corpus.size(), 1u);
}

TEST(Samples, UnlabeledAndUnindexedCenters) {
  auto g = fgtest::graph_of({tx("1", "a", "b", "1")});
  auto subs = index_subgraphs(build_subgraphs(g, std::vector<NodeId>{g.id("a")}, SamplingConfig{}));
  EXPECT_THROW(make_samples(g, {g.id("a")}, subs), DataError);
  g.set_label(g.id("a"), Label::fraud);
  EXPECT_EQ(make_samples(g, {g.id("a")}, subs).size(), 1u);
  EXPECT_THROW(make_samples(g, {g.id("b")}, subs), DataError);
}

TEST(Checkpoint, BundlesPolicy) {
  auto p = init_params(12, 2, 4);
  SplitPolicy pol;
  pol.bias = 0.75;
  auto j = checkpoint_to_json(p, pol, 2, 7, 0.8, 12);
  auto c = checkpoint_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(c.params, p);
  EXPECT_EQ(c.policy, pol);
  EXPECT_EQ(c.embed_dim, 12u);
  j["embed_dim"] = 16;
  EXPECT_THROW(checkpoint_from_json(j), ShapeError);
  EXPECT_THROW(checkpoint_from_json(nlohmann::json{{"format", "x"}}), DataError);
}

TEST(Experiment, SmallRunIsDeterministic) {
  PipelineConfig cfg;
  cfg.synth.n_accounts = 120;
  cfg.train.inner_epochs = 2;
  cfg.train.outer_epochs = 1;
  cfg.embed_dim = 32;
  cfg.hidden = 8;
  auto run = [&] {
    auto g = synth_graph(synthgen(cfg.synth));
    MockSummarizer mock;
    EvidenceStore store;
    return run_experiment(g, cfg, mock, store, fixed_clock());
  };
  auto a = run(), b = run();
  EXPECT_EQ(a.train.log_jsonl(), b.train.log_jsonl());
  EXPECT_EQ(a.train.best_params.digest(), b.train.best_params.digest());
  EXPECT_EQ(scores_to_csv(a.test_scores), scores_to_csv(b.test_scores));
  EXPECT_EQ(a.test_scores.scores.size(), a.splits.test.size());
  EXPECT_TRUE(a.report.auc.has_value());
  EXPECT_EQ(a.train.log.size(), 3u);
}
