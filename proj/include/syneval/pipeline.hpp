#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "syneval/nnet/sequence_lm.hpp"
#include "syneval/nnet/train.hpp"

namespace syneval::pipeline {

// Model size presets. The desk preset is the default; the paper preset
// mirrors the published architecture sizes and is far outside laptop budgets
// for training end to end.
struct Presets {
  nnet::RecurrentDims recurrent;
  nnet::AttentionDims attention;
};

Presets preset_dims(const std::string& name);

struct RunConfig {
  // paths
  std::string corpus_train;
  std::string corpus_dev;
  std::string suites_dir;
  std::string out_dir;

  // model selection: ngram | recurrent | attention | rnng | plm; empty means
  // "every trained family" for eval
  std::string model_family;
  std::string size_preset = "desk";
  std::vector<int> seeds;  // empty = family default (3 seeds; rnng 2)

  // preprocessing
  int max_len = 100;
  std::int64_t min_count = 2;

  // n-gram
  int ngram_order = 5;

  // training
  int epochs = -1;  // -1 = family default
  nnet::TrainingConfig training;
  bool learning_rate_set = false;  // flag overrides beat family defaults

  // beam settings
  int action_beam = 100;
  int word_beam = 10;
  int fast_track = 0;
  int max_open = 100;
  std::string beam_trace;  // optional per-word trace file

  // scoring / reporting
  std::uint64_t tie_seed = 1;
  double beam_exhaustion_tolerance = 0.0;
};

std::vector<int> default_seeds(const std::string& family);
int default_epochs(const std::string& family);
double default_learning_rate(const std::string& family);

// JSON config file + flag-style overrides applied by the CLI.
RunConfig config_from_json(const std::string& json_text, const std::string& origin);

// Pipeline commands; each validates its inputs before writing anything.
void cmd_preprocess(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_eval(const RunConfig& config);
void cmd_report(const RunConfig& config);

// Exit-code mapping used by the CLI: 0 ok, 2 validation, 3 io, 4 training
// failure, 5 beam exhaustion above the configured tolerance.
int run_command(const std::string& command, const RunConfig& config, std::string* error_out);

}  // namespace syneval::pipeline
