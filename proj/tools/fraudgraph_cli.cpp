// fraudgraph command-line driver. Every subcommand reads and writes files in
// the --out directory (inputs default to the names earlier stages write).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fraudgraph/pipeline.hpp"
#include "fraudgraph/remote.hpp"

namespace fs = std::filesystem;
using namespace fraudgraph;

namespace {

constexpr const char* kTokenEnv = "FRAUDGRAPH_API_TOKEN";

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string backend = "mock";
  std::string out = ".";
};

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg;
  if (!c.config.empty()) cfg = parse_config(read_file(c.config));
  if (c.seed) cfg.set_seed(*c.seed);
  validate(cfg);
  return cfg;
}

// Reproducible runs pin the clock through SOURCE_DATE_EPOCH.
Clock run_clock() {
  if (const char* s = std::getenv("SOURCE_DATE_EPOCH"); s && *s) {
    std::int64_t v = 0;
    try {
      v = std::stoll(s);
    } catch (const std::exception&) {
      throw ConfigError("SOURCE_DATE_EPOCH is not an integer");
    }
    return [v] { return v; };
  }
  return wall_clock_seconds;
}

fs::path in_out(const Common& c, const std::string& given, const char* fallback) {
  return given.empty() ? fs::path(c.out) / fallback : fs::path(given);
}

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

std::unique_ptr<Summarizer> make_backend(const Common& c, const PipelineConfig& cfg) {
  if (c.backend == "mock") return std::make_unique<MockSummarizer>();
  if (c.backend == "remote") {
    if (cfg.remote_url.empty()) throw ConfigError("remote backend needs remote_url in the config file");
    RemoteConfig rc;
    rc.url = cfg.remote_url;
    rc.model = cfg.model;
    rc.timeout_seconds = cfg.remote_timeout_seconds;
    rc.max_retries = cfg.remote_max_retries;
    if (const char* t = std::getenv(kTokenEnv)) rc.auth_token = t;
    return std::make_unique<RemoteSummarizer>(rc);
  }
  throw ConfigError("unknown backend '" + c.backend + "' (expected mock or remote)");
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "flat key=value configuration file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "seed for every random draw");
  sub->add_option("--backend", c.backend, "summarizer backend: mock | remote")->check(CLI::IsMember({"mock", "remote"}));
  sub->add_option("--out", c.out, "output directory");
}

std::vector<Subgraph> load_subgraphs(const fs::path& p, const TransactionGraph& g) {
  return subgraphs_from_jsonl(read_file(p), g);
}

std::string format_opt(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fraudgraph: account-level fraud detection over transaction graphs"};
  app.require_subcommand(1);
  Common c;

  // synthgen
  auto* synth = app.add_subcommand("synthgen", "generate a synthetic labelled ethereum-schema corpus");
  add_common(synth, c);

  // ingest
  std::string ingest_input, chain = "ethereum", format;
  auto* ingest = app.add_subcommand("ingest", "parse transaction records into a transaction graph");
  add_common(ingest, c);
  ingest->add_option("--input", ingest_input, "records file (default <out>/transactions.jsonl)");
  ingest->add_option("--chain", chain, "record schema: ethereum | bitcoin | generic");
  ingest->add_option("--format", format, "jsonl | csv (default: from the file extension)");

  // label
  std::string graph_path, labels_path;
  auto* label = app.add_subcommand("label", "attach account labels to a graph");
  add_common(label, c);
  label->add_option("--graph", graph_path, "graph file (default <out>/graph.json)");
  label->add_option("--labels", labels_path, "labels CSV account,label (default <out>/labels.csv)");

  // split
  auto* split = app.add_subcommand("split", "stratified train/val/test split of labelled accounts");
  add_common(split, c);
  split->add_option("--graph", graph_path, "graph file (default <out>/graph.json)");

  // subgraphs
  auto* subgraphs = app.add_subcommand("subgraphs", "sample and compress a subgraph around every labelled account");
  add_common(subgraphs, c);
  subgraphs->add_option("--graph", graph_path, "graph file (default <out>/graph.json)");

  // summarize
  std::string subgraphs_path, evidence_path;
  auto* summarize = app.add_subcommand("summarize", "generate forensic summaries for every subgraph node");
  add_common(summarize, c);
  summarize->add_option("--graph", graph_path, "graph file (default <out>/graph.json)");
  summarize->add_option("--subgraphs", subgraphs_path, "subgraphs file (default <out>/subgraphs.jsonl)");
  summarize->add_option("--evidence", evidence_path, "evidence store (default <out>/evidence.jsonl)");

  // train
  std::string splits_path;
  auto* train = app.add_subcommand("train", "alternating policy/encoder training");
  add_common(train, c);
  train->add_option("--graph", graph_path, "graph file (default <out>/graph.json)");
  train->add_option("--subgraphs", subgraphs_path, "subgraphs file (default <out>/subgraphs.jsonl)");
  train->add_option("--evidence", evidence_path, "evidence store (default <out>/evidence.jsonl)");
  train->add_option("--splits", splits_path, "splits file (default <out>/splits.json)");

  // infer
  std::string checkpoint_path, which = "test";
  auto* infer = app.add_subcommand("infer", "score accounts with a trained checkpoint");
  add_common(infer, c);
  infer->add_option("--graph", graph_path, "graph file (default <out>/graph.json)");
  infer->add_option("--subgraphs", subgraphs_path, "subgraphs file (default <out>/subgraphs.jsonl)");
  infer->add_option("--evidence", evidence_path, "evidence store (default <out>/evidence.jsonl)");
  infer->add_option("--splits", splits_path, "splits file (default <out>/splits.json)");
  infer->add_option("--checkpoint", checkpoint_path, "checkpoint (default <out>/checkpoint.json)");
  infer->add_option("--split", which, "train | val | test | all")->check(CLI::IsMember({"train", "val", "test", "all"}));

  // eval
  std::string scores_path;
  auto* eval = app.add_subcommand("eval", "precision/recall/F1/AUC/KS of a scores file");
  add_common(eval, c);
  eval->add_option("--scores", scores_path, "scores CSV (default <out>/scores.csv)");

  // report
  std::string log_path;
  auto* report = app.add_subcommand("report", "per-metric CSVs for plotting");
  add_common(report, c);
  report->add_option("--scores", scores_path, "scores CSV (default <out>/scores.csv)");
  report->add_option("--log", log_path, "training log (default <out>/train_log.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const PipelineConfig cfg = load_config(c);
    fs::create_directories(c.out);
    const fs::path out(c.out);

    if (*synth) {
      auto r = synthgen(cfg.synth);
      write_file_atomic(out / "transactions.jsonl", synth_records_jsonl(r));
      write_file_atomic(out / "labels.csv", synth_labels_csv(r));
      std::cout << "synthgen: " << r.records.size() << " records, " << r.labels.size() << " accounts ("
                << cfg.synth.fraud_count() << " fraud)\n";
    } else if (*ingest) {
      const fs::path input = in_out(c, ingest_input, "transactions.jsonl");
      InputFormat fmt = !format.empty() ? parse_input_format(format)
                        : input.extension() == ".csv" ? InputFormat::csv
                                                      : InputFormat::jsonl;
      std::ifstream in(input, std::ios::binary);
      if (!in) throw NotFoundError("cannot open " + input.string());
      auto res = ingest_transactions(in, parse_chain(chain), fmt);
      save_graph(res.graph, out / "graph.json");
      nlohmann::json rep{{"retained", res.report.retained},
                         {"dropped_zero_amount", res.report.dropped_zero_amount},
                         {"dropped_failed", res.report.dropped_failed},
                         {"rejected", res.report.rejected}};
      write_file_atomic(out / "ingest_report.json", rep.dump(2) + "\n");
      std::cout << "ingest: " << res.graph.node_count() << " accounts, " << res.graph.edge_count() << " edges, "
                << res.report.retained << " retained, " << res.report.dropped_zero_amount << " zero-amount, "
                << res.report.dropped_failed << " failed, " << res.report.rejected_total() << " rejected\n";
    } else if (*label) {
      auto g = load_graph(in_out(c, graph_path, "graph.json"));
      const fs::path lp = in_out(c, labels_path, "labels.csv");
      std::ifstream in(lp, std::ios::binary);
      if (!in) throw NotFoundError("cannot open " + lp.string());
      auto labels = read_labels_csv(in);
      auto lg = attach_labels(std::move(g), labels);
      save_graph(lg.graph, out / "graph.json");
      nlohmann::json rep{{"applied", lg.report.applied},
                         {"skipped_missing", lg.report.skipped_missing},
                         {"missing_accounts", lg.report.missing_accounts}};
      write_file_atomic(out / "label_report.json", rep.dump(2) + "\n");
      std::cout << "label: " << lg.report.applied << " applied, " << lg.report.skipped_missing
                << " not in graph\n";
    } else if (*split) {
      auto g = load_graph(in_out(c, graph_path, "graph.json"));
      auto labeled = labeled_nodes(g);
      auto s = split_dataset(std::span<const LabeledNode>(labeled), cfg.ratios, cfg.seed());
      write_file_atomic(out / "splits.json", splits_to_json(s, g).dump(2) + "\n");
      std::cout << "split: train " << s.train.size() << ", val " << s.val.size() << ", test " << s.test.size()
                << "\n";
    } else if (*subgraphs) {
      auto g = load_graph(in_out(c, graph_path, "graph.json"));
      auto centers = g.labeled_nodes();
      if (centers.empty()) throw DataError("graph has no labelled accounts");
      auto subs = build_subgraphs(g, centers, cfg.sampling);
      write_file_atomic(out / "subgraphs.jsonl", subgraphs_to_jsonl(subs, g));
      std::size_t total = 0;
      for (const auto& s : subs) total += s.size();
      std::cout << "subgraphs: " << subs.size() << " built, mean size "
                << static_cast<double>(total) / static_cast<double>(subs.size()) << "\n";
    } else if (*summarize) {
      auto g = load_graph(in_out(c, graph_path, "graph.json"));
      auto subs = load_subgraphs(in_out(c, subgraphs_path, "subgraphs.jsonl"), g);
      EvidenceStore store(in_out(c, evidence_path, "evidence.jsonl"));
      const std::size_t before = store.size();
      auto backend = make_backend(c, cfg);
      auto nodes = covered_nodes(subs);
      summarize_nodes(g, nodes, *backend, store, cfg, run_clock());
      store.flush();
      std::cout << "summarize: " << nodes.size() << " accounts, " << (store.size() - before)
                << " new evidence records (" << backend->tag() << ")\n";
    } else if (*train) {
      auto g = load_graph(in_out(c, graph_path, "graph.json"));
      auto subs = index_subgraphs(load_subgraphs(in_out(c, subgraphs_path, "subgraphs.jsonl"), g));
      auto splits = splits_from_json(read_json(in_out(c, splits_path, "splits.json")), g);
      EvidenceStore store(in_out(c, evidence_path, "evidence.jsonl"));
      auto tr = make_samples(g, splits.train, subs);
      auto va = make_samples(g, splits.val, subs);
      std::vector<Subgraph> used;
      for (const auto* set : {&tr, &va})
        for (const auto& s : *set) used.push_back(s.sub);
      SummaryCorpus corpus = corpus_from_store(g, covered_nodes(used), store, cfg);
      TrainHooks hooks;
      hooks.clock = run_clock();
      hooks.on_epoch = [](const EpochLog& e) { std::cerr << epoch_log_line(e) << "\n"; };
      auto res = alternate_train(pointers(tr), pointers(va), corpus, cfg.train,
                                 init_params(cfg.embed_dim, cfg.seed(), cfg.hidden), hooks);
      write_file_atomic(out / "train_log.jsonl", res.log_jsonl());
      write_file_atomic(out / "checkpoint.json",
                        checkpoint_to_json(res.best_params, res.best_policy, res.best_outer, res.best_inner,
                                           res.best_val_f1, cfg.embed_dim)
                                .dump() +
                            "\n");
      nlohmann::json meta{{"train_config", train_config_to_json(cfg.train)},
                          {"embed_dim", cfg.embed_dim},
                          {"hidden", cfg.hidden},
                          {"best_outer", res.best_outer},
                          {"best_inner", res.best_inner},
                          {"best_val_f1", res.best_val_f1},
                          {"stopped_early", res.stopped_early}};
      write_file_atomic(out / "train_meta.json", meta.dump(2) + "\n");
      std::cout << "train: best val F1 " << format_double(res.best_val_f1) << " at outer " << res.best_outer
                << " inner " << res.best_inner << (res.stopped_early ? " (early stop)" : "") << "\n";
    } else if (*infer) {
      auto g = load_graph(in_out(c, graph_path, "graph.json"));
      auto subs = index_subgraphs(load_subgraphs(in_out(c, subgraphs_path, "subgraphs.jsonl"), g));
      auto ck = checkpoint_from_json(read_json(in_out(c, checkpoint_path, "checkpoint.json")));
      if (ck.embed_dim != cfg.embed_dim) throw ConfigError("checkpoint embed_dim differs from the configuration");
      std::vector<NodeId> centers;
      if (which == "all") {
        centers = g.labeled_nodes();
      } else {
        auto s = splits_from_json(read_json(in_out(c, splits_path, "splits.json")), g);
        centers = which == "train" ? s.train : which == "val" ? s.val : s.test;
      }
      auto samples = make_samples(g, centers, subs);
      std::vector<Subgraph> used;
      for (const auto& s : samples) used.push_back(s.sub);
      EvidenceStore store(in_out(c, evidence_path, "evidence.jsonl"));
      SummaryCorpus corpus = corpus_from_store(g, covered_nodes(used), store, cfg);
      auto scores = score_samples(g, samples, corpus, ck.params, ck.policy, cfg.threshold);
      write_file_atomic(out / "scores.csv", scores_to_csv(scores));
      std::cout << "infer: " << scores.scores.size() << " accounts scored\n";
    } else if (*eval) {
      const fs::path sp = in_out(c, scores_path, "scores.csv");
      std::ifstream in(sp, std::ios::binary);
      if (!in) throw NotFoundError("cannot open " + sp.string());
      ScoreSet set = scores_from_csv(in);
      set.threshold = cfg.threshold;
      auto r = compute_metrics(set);
      write_file_atomic(out / "report.csv", report_to_csv(r));
      std::cout << "eval: precision " << format_opt(r.precision) << ", recall " << format_opt(r.recall) << ", f1 "
                << format_opt(r.f1) << ", auc " << format_opt(r.auc) << ", ks " << format_opt(r.ks) << "\n";
    } else if (*report) {
      const fs::path sp = in_out(c, scores_path, "scores.csv");
      std::ifstream in(sp, std::ios::binary);
      if (!in) throw NotFoundError("cannot open " + sp.string());
      ScoreSet set = scores_from_csv(in);
      set.threshold = cfg.threshold;
      auto r = compute_metrics(set);
      write_file_atomic(out / "report_metrics.csv", report_to_csv(r));
      std::string hist = "bin_low,bin_high,fraud,benign\n";
      for (std::size_t b = 0; b < kHistogramBins; ++b)
        hist += format_double(static_cast<double>(b) / kHistogramBins) + "," +
                format_double(static_cast<double>(b + 1) / kHistogramBins) + "," + std::to_string(r.hist_fraud[b]) +
                "," + std::to_string(r.hist_benign[b]) + "\n";
      write_file_atomic(out / "report_histogram.csv", hist);
      const fs::path lp = in_out(c, log_path, "train_log.jsonl");
      if (fs::exists(lp)) {
        std::string curves = "step,outer,inner,stage,mean_loss,mean_reward,val_f1\n";
        std::istringstream ls(read_file(lp));
        std::string line;
        std::size_t step = 0;
        auto cell = [](const nlohmann::json& v) { return v.is_null() ? std::string() : format_double(v.get<double>()); };
        while (std::getline(ls, line)) {
          if (trim(line).empty()) continue;
          nlohmann::json j;
          try {
            j = nlohmann::json::parse(line);
          } catch (const nlohmann::json::exception& e) {
            throw DataError(lp.string() + ": " + e.what());
          }
          curves += std::to_string(++step) + "," + std::to_string(j.at("outer").get<int>()) + "," +
                    std::to_string(j.at("inner").get<int>()) + "," + j.at("stage").get<std::string>() + "," +
                    cell(j.at("mean_loss")) + "," + cell(j.at("mean_reward")) + "," + cell(j.at("val_f1")) + "\n";
        }
        write_file_atomic(out / "report_curves.csv", curves);
      }
      std::cout << "report: written to " << out.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "fraudgraph: " << app.get_subcommands().front()->get_name() << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
