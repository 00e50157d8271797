// syneval: train small language models on bracketed treebanks and score them
// on targeted minimal-pair suites via surprisal differences.
//
//   syneval preprocess --corpus train.trees --corpus-dev dev.trees --out runs/demo
//   syneval train --model recurrent --out runs/demo
//   syneval eval --suites suites/ --out runs/demo
//   syneval report --out runs/demo
//
// Configuration comes from an optional JSON file (--config) with flag
// overrides. The SYNEVAL_OUT environment variable supplies a default output
// root. Exit codes: 0 ok, 2 validation error, 3 I/O error, 4 training
// failure, 5 beam exhaustion above tolerance.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "syneval/pipeline.hpp"

using syneval::pipeline::RunConfig;

int main(int argc, char** argv) {
  CLI::App app{"targeted syntactic evaluation of small language models"};
  app.require_subcommand(1);

  std::string config_path;
  std::string corpus, corpus_dev, model, preset, suites, out, beam_trace;
  std::vector<int> seeds;
  int action_beam = -1, word_beam = -1, fast_track = -1, epochs = -2, ngram_order = -1;
  int max_len = -1;
  long long min_count = -1;
  unsigned long long tie_seed = 0;
  bool tie_seed_set = false;
  double exhaustion_tolerance = -1.0;
  double learning_rate = -1.0, dropout = -1.0;
  int batch_size = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--corpus", corpus, "training treebank (bracketed, one tree per line)");
    cmd->add_option("--corpus-dev", corpus_dev, "development treebank");
    cmd->add_option("--model", model, "model family: ngram|recurrent|attention|rnng|plm");
    cmd->add_option("--preset", preset, "size preset: desk|paper");
    cmd->add_option("--seed", seeds, "training seed (repeatable)");
    cmd->add_option("--action-beam", action_beam, "word-synchronous action beam size");
    cmd->add_option("--word-beam", word_beam, "word beam size");
    cmd->add_option("--fast-track", fast_track, "word successors exempt from the action beam");
    cmd->add_option("--suites", suites, "directory of test-suite json files");
    cmd->add_option("--out", out, "output directory (default $SYNEVAL_OUT)");
    cmd->add_option("--tie-seed", tie_seed, "seed for tie-breaking coin flips")
        ->each([&](const std::string&) { tie_seed_set = true; });
    cmd->add_option("--epochs", epochs, "training epochs (family default when unset)");
    cmd->add_option("--ngram-order", ngram_order, "n-gram order");
    cmd->add_option("--max-len", max_len, "sentence length filter");
    cmd->add_option("--min-count", min_count, "rare-token threshold");
    cmd->add_option("--batch-size", batch_size, "sentences per update");
    cmd->add_option("--learning-rate", learning_rate, "optimizer step size");
    cmd->add_option("--dropout", dropout, "dropout rate");
    cmd->add_option("--beam-trace", beam_trace, "write per-word beam trace to this file");
    cmd->add_option("--exhaustion-tolerance", exhaustion_tolerance,
                    "tolerated beam-exhaustion fraction");
  };

  CLI::App* preprocess = app.add_subcommand("preprocess", "filter, unkify and index a treebank");
  CLI::App* train = app.add_subcommand("train", "train one model family");
  CLI::App* eval = app.add_subcommand("eval", "score trained models on test suites");
  CLI::App* report = app.add_subcommand("report", "aggregate results into tables and charts");
  for (CLI::App* cmd : {preprocess, train, eval, report}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  RunConfig config;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "syneval: cannot open config " << config_path << "\n";
      return 3;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
      config = syneval::pipeline::config_from_json(buf.str(), config_path);
    } catch (const std::exception& e) {
      std::cerr << "syneval: " << e.what() << "\n";
      return 2;
    }
  }
  if (const char* env = std::getenv("SYNEVAL_OUT"); env && config.out_dir.empty())
    config.out_dir = env;

  if (!corpus.empty()) config.corpus_train = corpus;
  if (!corpus_dev.empty()) config.corpus_dev = corpus_dev;
  if (!model.empty()) config.model_family = model;
  if (!preset.empty()) config.size_preset = preset;
  if (!suites.empty()) config.suites_dir = suites;
  if (!out.empty()) config.out_dir = out;
  if (!seeds.empty()) config.seeds = seeds;
  if (action_beam >= 0) config.action_beam = action_beam;
  if (word_beam >= 0) config.word_beam = word_beam;
  if (fast_track >= 0) config.fast_track = fast_track;
  if (epochs >= -1 && epochs != -2) config.epochs = epochs;
  if (ngram_order > 0) config.ngram_order = ngram_order;
  if (max_len > 0) config.max_len = max_len;
  if (min_count > 0) config.min_count = min_count;
  if (tie_seed_set) config.tie_seed = tie_seed;
  if (exhaustion_tolerance >= 0.0) config.beam_exhaustion_tolerance = exhaustion_tolerance;
  if (batch_size > 0) config.training.batch_size = batch_size;
  if (learning_rate > 0) {
    config.training.learning_rate = learning_rate;
    config.learning_rate_set = true;
  }
  if (dropout >= 0) config.training.dropout = dropout;
  if (!beam_trace.empty()) config.beam_trace = beam_trace;

  const std::string command = app.get_subcommands().front()->get_name();
  std::string error;
  const int code = syneval::pipeline::run_command(command, config, &error);
  if (code != 0) std::cerr << "syneval " << command << ": " << error << "\n";
  return code;
}
