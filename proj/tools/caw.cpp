// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: train / eval / ablate / sweep / stats.
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 runtime error.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "caw/checkpoint.hpp"
#include "caw/experiments.hpp"
#include "caw/svg.hpp"
#include "caw/train.hpp"
#include "caw/version.hpp"

namespace fs = std::filesystem;
using namespace caw;

namespace {

struct CliOptions {
  std::string dataset, valid_dataset, test_dataset;
  std::string synthetic;
  std::string out = "caw-out";
  std::string checkpoint;
  std::string pretrained;
  std::string split = "test";
  std::string strategy = "mul";
  std::string char_encoder = "rnn";
  double gamma = 0.9;
  double lr0 = 0.001;
  std::size_t layers = 3, epochs = 10, batch = 64;
  std::size_t word_dim = 200, char_dim = 100, char_hidden = 128, hidden = 128, char_proj_dim = 100;
  double init_gain = 1.0;
  std::uint64_t seed = 1;
  std::size_t sweep_seeds = 3;
};

// flags explicitly set on the command line (or via CAW_* env vars)
using SetFlags = std::map<std::string, bool>;

void add_common_flags(CLI::App* cmd, CliOptions& o) {
  cmd->add_option("--dataset", o.dataset, "CBT-format training file")->envname("CAW_DATASET");
  cmd->add_option("--valid-dataset", o.valid_dataset, "CBT-format validation file");
  cmd->add_option("--test-dataset", o.test_dataset, "CBT-format test file");
  cmd->add_option("--synthetic", o.synthetic,
                  "synthetic preset (small|rare|sweep) or key-value spec file")
      ->envname("CAW_SYNTHETIC");
  cmd->add_option("--out", o.out, "output directory")->envname("CAW_OUT");
  cmd->add_option("--strategy", o.strategy, "word_only|concat|sum|mul")->envname("CAW_STRATEGY");
  cmd->add_option("--gamma", o.gamma, "short-list filter ratio in (0,1]")->envname("CAW_GAMMA");
  cmd->add_option("--char-encoder", o.char_encoder, "rnn|cnn")->envname("CAW_CHAR_ENCODER");
  cmd->add_option("--layers", o.layers, "stacked attention layers")->envname("CAW_LAYERS");
  cmd->add_option("--seed", o.seed, "rng seed")->envname("CAW_SEED");
  cmd->add_option("--epochs", o.epochs, "training epochs")->envname("CAW_EPOCHS");
  cmd->add_option("--batch", o.batch, "batch size")->envname("CAW_BATCH");
  cmd->add_option("--lr0", o.lr0, "initial learning rate");
  cmd->add_option("--word-dim", o.word_dim, "word embedding dimension");
  cmd->add_option("--char-dim", o.char_dim, "character embedding dimension");
  cmd->add_option("--char-hidden", o.char_hidden, "character GRU units");
  cmd->add_option("--char-proj-dim", o.char_proj_dim, "character output dim under concat");
  cmd->add_option("--hidden", o.hidden, "contextual GRU units per direction");
  cmd->add_option("--init-gain", o.init_gain, "xavier gain for network weights");
  cmd->add_option("--pretrained-embeddings", o.pretrained, "text-format word vectors");
}

SetFlags collect_set_flags(const CLI::App* cmd) {
  SetFlags set;
  for (const auto* opt : cmd->get_options())
    for (const auto& name : opt->get_lnames()) set[name] = opt->count() > 0;
  return set;
}

// precedence: built-in defaults < synthetic spec file keys < explicit flags
void apply_spec_overrides(CliOptions& o, const SyntheticSpec& spec, const SetFlags& set) {
  auto want = [&](const char* cli_name) { return !set.count(cli_name) || !set.at(cli_name); };
  for (const auto& [key, value] : spec.overrides) {
    try {
      if (key == "strategy") { if (want("strategy")) o.strategy = value; }
      else if (key == "char_encoder") { if (want("char-encoder")) o.char_encoder = value; }
      else if (key == "gamma") { if (want("gamma")) o.gamma = std::stod(value); }
      else if (key == "lr0") { if (want("lr0")) o.lr0 = std::stod(value); }
      else if (key == "layers") { if (want("layers")) o.layers = std::stoull(value); }
      else if (key == "epochs") { if (want("epochs")) o.epochs = std::stoull(value); }
      else if (key == "batch") { if (want("batch")) o.batch = std::stoull(value); }
      else if (key == "word_dim") { if (want("word-dim")) o.word_dim = std::stoull(value); }
      else if (key == "char_dim") { if (want("char-dim")) o.char_dim = std::stoull(value); }
      else if (key == "char_hidden") { if (want("char-hidden")) o.char_hidden = std::stoull(value); }
      else if (key == "char_proj_dim") { if (want("char-proj-dim")) o.char_proj_dim = std::stoull(value); }
      else if (key == "hidden") { if (want("hidden")) o.hidden = std::stoull(value); }
      else if (key == "init_gain") { if (want("init-gain")) o.init_gain = std::stod(value); }
      else throw ConfigError("synthetic spec: unknown model/train key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ConfigError("synthetic spec: bad value for '" + key + "': " + value);
    }
  }
}

TrainConfig to_train_config(const CliOptions& o) {
  TrainConfig cfg;
  cfg.model.strategy = parse_strategy(o.strategy);
  cfg.model.char_encoder = parse_char_encoder(o.char_encoder);
  cfg.model.gamma = o.gamma;
  cfg.model.word_dim = o.word_dim;
  cfg.model.char_dim = o.char_dim;
  cfg.model.char_hidden = o.char_hidden;
  cfg.model.char_proj_dim = o.char_proj_dim;
  cfg.model.hidden = o.hidden;
  cfg.model.layers = o.layers;
  cfg.model.init_gain = o.init_gain;
  cfg.lr0 = o.lr0;
  cfg.batch = o.batch;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

struct LoadedData {
  RunData data;
  std::optional<SyntheticSpec> spec;
};

LoadedData load_data(CliOptions& o, const SetFlags& set) {
  LoadedData ld;
  if (!o.synthetic.empty()) {
    SyntheticSpec spec = load_synthetic_spec(o.synthetic);
    apply_spec_overrides(o, spec, set);
    ld.data = run_data_from(generate_synthetic(spec));
    ld.spec = std::move(spec);
    return ld;
  }
  if (o.dataset.empty())
    throw ConfigError("need --dataset <path> or --synthetic <spec>");
  ld.data.train = load_cbt(o.dataset);
  if (!o.valid_dataset.empty()) ld.data.valid = load_cbt(o.valid_dataset);
  if (!o.test_dataset.empty()) ld.data.test = load_cbt(o.test_dataset);
  return ld;
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ConfigError("cannot create output directory " + out + ": " + ec.message());
}

int cmd_train(CliOptions& o, const SetFlags& set) {
  LoadedData ld = load_data(o, set);
  TrainConfig cfg = to_train_config(o);
  ensure_out_dir(o.out);

  CawReader model = build_reader(cfg, ld.data.train);
  if (!o.pretrained.empty()) {
    const std::size_t n =
        load_pretrained_embeddings(model.embedder().word_table, model.embedder().vocab, o.pretrained);
    std::printf("loaded %zu pretrained rows from %s\n", n, o.pretrained.c_str());
  }
  std::printf("train: %zu examples, vocab %zu, %s\n", ld.data.train.size(),
              model.embedder().vocab.size(), config_echo(cfg).c_str());

  RunOutcome out = run_training(model, cfg, ld.data);
  for (const auto& row : out.training.metrics)
    if (row.split == "valid")
      std::printf("epoch %zu valid_acc %.4f lr %.6g\n", row.epoch, row.accuracy, row.lr);
  if (out.training.skipped)
    std::printf("warning: skipped %zu examples whose answer never occurs in the passage\n",
                out.training.skipped);

  const std::string csv_path = o.out + "/metrics.csv";
  write_text_file(csv_path, metrics_csv(out.training.metrics, cfg));
  const std::string ck_path = o.out + "/checkpoint.json";
  save_checkpoint(ck_path, model, cfg);
  std::printf("best valid_acc %.4f (epoch %zu)", out.training.best_valid_accuracy,
              out.training.best_epoch);
  if (out.test_eval.total) std::printf("; test_acc %.4f", out.test_eval.accuracy);
  std::printf("\nwrote %s and %s\n", csv_path.c_str(), ck_path.c_str());
  return 0;
}

int cmd_eval(CliOptions& o, const SetFlags& set) {
  if (o.checkpoint.empty()) throw ConfigError("eval needs --checkpoint <file>");
  Checkpoint ck = load_checkpoint(o.checkpoint);

  std::vector<ClozeExample> data;
  if (!o.synthetic.empty()) {
    SyntheticSpec spec = load_synthetic_spec(o.synthetic);
    apply_spec_overrides(o, spec, set);
    SyntheticData d = generate_synthetic(spec);
    // the checkpoint vocabulary must match the pipeline this spec produces
    std::vector<std::vector<std::string>> corpus;
    for (const auto& ex : d.train) {
      corpus.push_back(ex.passage);
      corpus.push_back(ex.query);
    }
    const std::string pipeline_hash = vocab_hash(build_vocab(corpus));
    const std::string ck_hash = vocab_hash(ck.model.embedder().vocab);
    if (pipeline_hash != ck_hash)
      throw ParseError("vocabulary hash mismatch: checkpoint was trained on a different pipeline (" +
                       ck_hash + " vs " + pipeline_hash +
                       "); refusing to evaluate against this synthetic spec");
    data = o.split == "train" ? d.train : o.split == "valid" ? d.valid : d.test;
  } else if (!o.dataset.empty()) {
    data = load_cbt(o.dataset);
  } else {
    throw ConfigError("eval needs --dataset <path> or --synthetic <spec>");
  }

  EvalResult res = evaluate(ck.model, data, ck.config.batch);
  std::printf("eval: %zu examples, accuracy %.6f (%zu correct, %zu unanswerable)\n", res.total,
              res.accuracy, res.correct, res.unanswerable);
  ensure_out_dir(o.out);
  nlohmann::json j{{"accuracy", res.accuracy},
                   {"correct", res.correct},
                   {"total", res.total},
                   {"unanswerable", res.unanswerable},
                   {"split", o.split},
                   {"checkpoint", o.checkpoint},
                   {"config_echo", config_echo(ck.config)},
                   {"seed", ck.config.seed},
                   {"version", kVersion}};
  write_text_file(o.out + "/eval.json", j.dump(2) + "\n");
  std::printf("wrote %s/eval.json\n", o.out.c_str());
  return 0;
}

int cmd_stats(CliOptions& o, const SetFlags& set) {
  LoadedData ld = load_data(o, set);
  ensure_out_dir(o.out);
  std::ostringstream csv;
  csv << "# version=" << kVersion << " seed=" << o.seed << "\n";
  csv << "split,queries,avg_passage_words,avg_query_words,vocabulary\n";
  auto emit = [&](const char* name, const std::vector<ClozeExample>& d) {
    if (d.empty()) return;
    DatasetStats s = stats(d);
    std::printf("%-6s queries %-7zu avg_passage %-8.2f avg_query %-6.2f vocab %zu\n", name,
                s.queries, s.avg_passage_words, s.avg_query_words, s.vocabulary);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6g,%.6g,%zu\n", name, s.queries, s.avg_passage_words,
                  s.avg_query_words, s.vocabulary);
    csv << buf;
  };
  emit("train", ld.data.train);
  emit("valid", ld.data.valid);
  emit("test", ld.data.test);
  write_text_file(o.out + "/stats.csv", csv.str());
  std::printf("wrote %s/stats.csv\n", o.out.c_str());
  return 0;
}

int cmd_ablate(CliOptions& o, const SetFlags& set) {
  LoadedData ld = load_data(o, set);
  TrainConfig cfg = to_train_config(o);
  ensure_out_dir(o.out);
  std::printf("ablation over {word_only, concat, sum, mul}: %s\n", config_echo(cfg).c_str());
  std::vector<StrategyResult> rows = run_ablation(cfg, ld.data);
  for (const auto& r : rows)
    std::printf("%-10s valid_acc %.4f test_acc %.4f\n", to_string(r.strategy), r.valid_acc,
                r.test_acc);
  write_text_file(o.out + "/ablation.csv", ablation_csv(rows, cfg));
  std::printf("wrote %s/ablation.csv\n", o.out.c_str());
  return 0;
}

int cmd_sweep(CliOptions& o, const SetFlags& set) {
  LoadedData ld = load_data(o, set);
  TrainConfig cfg = to_train_config(o);
  ensure_out_dir(o.out);
  std::printf("gamma sweep over {0.1..1.0}, %zu seeds: %s\n", o.sweep_seeds,
              config_echo(cfg).c_str());
  std::vector<SweepPoint> points = run_gamma_sweep(cfg, ld.data, o.sweep_seeds);
  for (const auto& p : points)
    std::printf("gamma %.1f valid_acc %.4f test_acc %.4f\n", p.gamma, p.valid_acc, p.test_acc);

  write_text_file(o.out + "/sweep.csv", sweep_csv(points, cfg));
  PlotSeries valid{"valid", {}}, test{"test", {}};
  for (const auto& p : points) {
    valid.points.emplace_back(p.gamma, p.valid_acc);
    test.points.emplace_back(p.gamma, p.test_acc);
  }
  write_text_file(o.out + "/sweep.svg",
                  render_line_plot("accuracy vs filter ratio", "gamma", "accuracy", {valid, test}));

  const SweepPoint best = best_sweep_point(points);
  std::ostringstream summary;
  summary << "# " << config_echo(cfg) << "\n"
          << "sweep_seeds=" << o.sweep_seeds << "\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "best gamma=%.1f valid_acc=%.9g test_acc=%.9g\n", best.gamma,
                best.valid_acc, best.test_acc);
  summary << buf;
  write_text_file(o.out + "/summary.txt", summary.str());
  std::printf("%s", buf);
  std::printf("wrote %s/sweep.csv, %s/sweep.svg, %s/summary.txt\n", o.out.c_str(), o.out.c_str(),
              o.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) +
               " - character-augmented word embedding reader for cloze-style comprehension"};
  app.require_subcommand(1);
  CliOptions o;

  CLI::App* c_train = app.add_subcommand("train", "train a reader and write checkpoint + metrics");
  CLI::App* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  CLI::App* c_ablate = app.add_subcommand("ablate", "compare join strategies on shared data");
  CLI::App* c_sweep = app.add_subcommand("sweep", "train across the filter-ratio grid");
  CLI::App* c_stats = app.add_subcommand("stats", "dataset statistics");
  for (CLI::App* c : {c_train, c_eval, c_ablate, c_sweep, c_stats}) add_common_flags(c, o);
  c_eval->add_option("--checkpoint", o.checkpoint, "checkpoint file to evaluate");
  c_eval->add_option("--split", o.split, "synthetic split to evaluate (train|valid|test)");
  c_sweep->add_option("--sweep-seeds", o.sweep_seeds, "seeds averaged per grid point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    CLI::App* cmd = app.get_subcommands().at(0);
    const SetFlags set = collect_set_flags(cmd);
    if (cmd == c_train) return cmd_train(o, set);
    if (cmd == c_eval) return cmd_eval(o, set);
    if (cmd == c_ablate) return cmd_ablate(o, set);
    if (cmd == c_sweep) return cmd_sweep(o, set);
    if (cmd == c_stats) return cmd_stats(o, set);
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 3;
  }
}
