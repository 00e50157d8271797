#include "syneval/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <array>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "syneval/evalharness.hpp"
#include "syneval/ngram.hpp"
#include "syneval/nnet/checkpoint.hpp"
#include "syneval/nnet/sequence_lm.hpp"
#include "syneval/suite.hpp"
#include "syneval/synlm/models.hpp"
#include "syneval/treebank.hpp"
#include "syneval/wsbeam.hpp"

namespace syneval::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

Presets preset_dims(const std::string& name) {
  if (name == "desk") {
    return Presets{nnet::RecurrentDims{2, 64, 64}, nnet::AttentionDims{2, 4, 128, 512}};
  }
  if (name == "paper") {
    return Presets{nnet::RecurrentDims{2, 256, 256}, nnet::AttentionDims{12, 12, 768, 1024}};
  }
  throw std::invalid_argument("unknown size preset: " + name);
}

std::vector<int> default_seeds(const std::string& family) {
  if (family == "ngram") return {1};
  if (family == "rnng") return {1, 2};
  return {1, 2, 3};
}

int default_epochs(const std::string& family) {
  if (family == "recurrent") return 30;
  if (family == "attention") return 12;
  if (family == "rnng") return 26;
  if (family == "plm") return 8;
  return 0;
}

// The joint models spread most predictions over near-deterministic
// structural actions, which shrinks the per-prediction gradient on the
// lexical decisions; a larger step compensates.
double default_learning_rate(const std::string& family) {
  if (family == "rnng") return 6e-3;
  return 3e-3;
}

namespace {

const std::set<std::string> kFamilies{"ngram", "recurrent", "attention", "rnng", "plm"};

std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

void require_family(const std::string& family) {
  if (!kFamilies.count(family))
    throw std::invalid_argument("unknown model family: '" + family + "'");
}

std::string corpus_dir(const RunConfig& c) { return c.out_dir + "/corpus"; }
std::string models_dir(const RunConfig& c) { return c.out_dir + "/models"; }
std::string results_dir(const RunConfig& c) { return c.out_dir + "/results"; }
std::string report_dir(const RunConfig& c) { return c.out_dir + "/report"; }

std::uint64_t corpus_fingerprint(const std::vector<ParseTree>& trees) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const ParseTree& t : trees) {
    h = fnv1a64(render(t), h);
    h = fnv1a64("\n", h);
  }
  return h;
}

std::vector<std::vector<TokenId>> word_sequences(const std::vector<ParseTree>& trees,
                                                 const Vocabulary& vocab) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(trees.size());
  for (const ParseTree& t : trees) out.push_back(vocab.to_ids(leaves(t).tokens));
  return out;
}

struct CheckpointConfig {
  std::string family;
  std::string preset;
  int vocab_size = 0;
  int seed = 0;
  int epochs = 0;
  double learning_rate = 0.0;
  double dropout = 0.0;
  int batch_size = 0;
  double dev_perplexity = 0.0;
  std::string fingerprint;
  std::vector<std::string> nonterminals;

  std::string to_json() const {
    json j;
    j["family"] = family;
    j["preset"] = preset;
    j["vocab_size"] = vocab_size;
    j["seed"] = seed;
    j["epochs"] = epochs;
    j["learning_rate"] = learning_rate;
    j["dropout"] = dropout;
    j["batch_size"] = batch_size;
    j["dev_perplexity"] = dev_perplexity;
    j["corpus_fingerprint"] = fingerprint;
    j["nonterminals"] = nonterminals;
    return j.dump();
  }

  static CheckpointConfig from_json(const std::string& text) {
    const json j = json::parse(text);
    CheckpointConfig c;
    c.family = j.at("family").get<std::string>();
    c.preset = j.at("preset").get<std::string>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.seed = j.at("seed").get<int>();
    c.dev_perplexity = j.at("dev_perplexity").get<double>();
    c.fingerprint = j.at("corpus_fingerprint").get<std::string>();
    c.nonterminals = j.at("nonterminals").get<std::vector<std::string>>();
    return c;
  }
};

void write_train_log(const std::string& path, int seed, const nnet::TrainLog& log, bool append) {
  std::ofstream out(path, append ? std::ios::app | std::ios::binary : std::ios::binary);
  if (!out) throw IoError("cannot write training log: " + path);
  if (!append) out << "seed\tepoch\ttrain_loss\tdev_perplexity\n";
  for (std::size_t e = 0; e < log.dev_perplexity.size(); ++e) {
    out << seed << '\t' << e << '\t'
        << (e == 0 ? "-" : fmt(log.train_loss[e - 1])) << '\t' << fmt(log.dev_perplexity[e])
        << '\n';
  }
  out << seed << "\tbest\t-\t" << fmt(log.best_dev_perplexity) << '\n';
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

}  // namespace

RunConfig config_from_json(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": invalid config json: " + e.what());
  }
  RunConfig c;
  auto str = [&](const char* key, std::string& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::string>();
  };
  if (j.contains("corpus")) {
    const json& corpus = j.at("corpus");
    if (corpus.is_string()) {
      c.corpus_train = corpus.get<std::string>();
    } else {
      if (corpus.contains("train")) c.corpus_train = corpus.at("train").get<std::string>();
      if (corpus.contains("dev")) c.corpus_dev = corpus.at("dev").get<std::string>();
    }
  }
  str("suites", c.suites_dir);
  str("out", c.out_dir);
  str("model", c.model_family);
  str("preset", c.size_preset);
  str("beam_trace", c.beam_trace);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<int>>();
  auto num = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };
  num("max_len", c.max_len);
  num("min_count", c.min_count);
  num("ngram_order", c.ngram_order);
  num("epochs", c.epochs);
  num("action_beam", c.action_beam);
  num("word_beam", c.word_beam);
  num("fast_track", c.fast_track);
  num("max_open", c.max_open);
  num("tie_seed", c.tie_seed);
  num("beam_exhaustion_tolerance", c.beam_exhaustion_tolerance);
  num("batch_size", c.training.batch_size);
  if (j.contains("learning_rate")) {
    c.training.learning_rate = j.at("learning_rate").get<double>();
    c.learning_rate_set = true;
  }
  num("dropout", c.training.dropout);
  num("grad_clip_norm", c.training.grad_clip_norm);
  return c;
}

void cmd_preprocess(const RunConfig& config) {
  if (config.out_dir.empty()) throw std::invalid_argument("preprocess: output directory not set");
  if (config.max_len < 1) throw std::invalid_argument("preprocess: max_len must be >= 1");
  std::vector<ParseTree> train = read_treebank_file(config.corpus_train);
  std::vector<ParseTree> dev =
      config.corpus_dev.empty() ? std::vector<ParseTree>{} : read_treebank_file(config.corpus_dev);

  train = filter_treebank(train, static_cast<std::size_t>(config.max_len));
  dev = filter_treebank(dev, static_cast<std::size_t>(config.max_len));
  if (train.empty()) throw ValidationError("preprocess: no sentences survive the length filter");

  std::vector<Sentence> sentences;
  sentences.reserve(train.size());
  for (const ParseTree& t : train) sentences.push_back(leaves(t));
  const Vocabulary vocab = build_vocabulary(sentences, config.min_count);

  std::vector<ParseTree> train_unk, dev_unk;
  train_unk.reserve(train.size());
  for (const ParseTree& t : train) train_unk.push_back(unkify_tree(t, vocab));
  dev_unk.reserve(dev.size());
  for (const ParseTree& t : dev) dev_unk.push_back(unkify_tree(t, vocab));

  fs::create_directories(corpus_dir(config));
  vocab.save(corpus_dir(config) + "/vocab.tsv");
  vocab.save_frequencies(corpus_dir(config) + "/vocab_counts.tsv");
  write_treebank_file(corpus_dir(config) + "/train.trees", train_unk);
  write_treebank_file(corpus_dir(config) + "/dev.trees", dev_unk);

  const synlm::ActionInventory inventory = synlm::ActionInventory::from_treebank(vocab, train_unk);
  synlm::write_oracle_file(corpus_dir(config) + "/train.actions", train_unk, inventory);

  std::vector<Sentence> unk_sentences;
  unk_sentences.reserve(train_unk.size());
  for (const ParseTree& t : train_unk) unk_sentences.push_back(leaves(t));
  const CorpusStats stats = corpus_stats(unk_sentences, vocab);
  std::ofstream out(corpus_dir(config) + "/stats.tsv", std::ios::binary);
  if (!out) throw IoError("cannot write stats file");
  out << "token_count\t" << stats.token_count << '\n';
  out << "vocab_size\t" << stats.vocab_size << '\n';
  out << "length\tcount\n";
  for (const auto& [len, count] : stats.sentence_length_histogram)
    out << len << '\t' << count << '\n';
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

struct LoadedCorpus {
  Vocabulary vocab;
  std::vector<ParseTree> train_trees;
  std::vector<ParseTree> dev_trees;
  std::string fingerprint;
};

LoadedCorpus load_corpus(const RunConfig& config) {
  LoadedCorpus c;
  const std::string dir = corpus_dir(config);
  if (!fs::exists(dir + "/vocab.tsv"))
    throw IoError("preprocessed corpus not found under " + dir + " (run preprocess first)");
  c.vocab = Vocabulary::load(dir + "/vocab.tsv");
  if (fs::exists(dir + "/vocab_counts.tsv")) c.vocab.load_frequencies(dir + "/vocab_counts.tsv");
  c.train_trees = read_treebank_file(dir + "/train.trees");
  if (fs::exists(dir + "/dev.trees")) c.dev_trees = read_treebank_file(dir + "/dev.trees");
  if (c.dev_trees.empty()) c.dev_trees = c.train_trees;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(corpus_fingerprint(c.train_trees)));
  c.fingerprint = buf;
  return c;
}

template <class Model>
void train_and_save(Model& model, const std::string& family, const RunConfig& config,
                    const LoadedCorpus& corpus, const std::vector<std::vector<TokenId>>& train,
                    const std::vector<std::vector<TokenId>>& dev, int seed,
                    const std::vector<std::string>& nonterminals, bool append_log) {
  nnet::TrainingConfig tc = config.training;
  tc.seed = static_cast<std::uint64_t>(seed);
  tc.epochs = config.epochs >= 0 ? config.epochs : default_epochs(family);
  if (!config.learning_rate_set) tc.learning_rate = default_learning_rate(family);
  nnet::TrainLog log;
  try {
    log = nnet::train_sequence_model(model, train, dev, tc);
  } catch (const TrainingError& e) {
    throw TrainingError(family + " seed " + std::to_string(seed) + ": " + e.what());
  }
  CheckpointConfig ck;
  ck.family = family;
  ck.preset = config.size_preset;
  ck.vocab_size = corpus.vocab.size();
  ck.seed = seed;
  ck.epochs = tc.epochs;
  ck.learning_rate = tc.learning_rate;
  ck.dropout = tc.dropout;
  ck.batch_size = tc.batch_size;
  ck.dev_perplexity = log.best_dev_perplexity;
  ck.fingerprint = corpus.fingerprint;
  ck.nonterminals = nonterminals;
  const std::string dir = models_dir(config) + "/" + family;
  fs::create_directories(dir);
  nnet::save_checkpoint(dir + "/seed" + std::to_string(seed) + ".ckpt", family, ck.to_json(),
                        model.params());
  write_train_log(dir + "/train_log.tsv", seed, log, append_log);
}

}  // namespace

void cmd_train(const RunConfig& config) {
  if (config.model_family.empty())
    throw std::invalid_argument("train: a model family must be configured (--model)");
  require_family(config.model_family);
  const std::string family = config.model_family;
  const LoadedCorpus corpus = load_corpus(config);
  const std::vector<int> seeds = config.seeds.empty() ? default_seeds(family) : config.seeds;
  if (seeds.empty()) throw std::invalid_argument("train: seeds must be non-empty");
  const Presets presets = preset_dims(config.size_preset);

  if (family == "ngram") {
    const auto train = word_sequences(corpus.train_trees, corpus.vocab);
    const NGramModel model = fit_kn_ids(train, config.ngram_order, corpus.vocab.size());
    const std::string dir = models_dir(config) + "/ngram";
    fs::create_directories(dir);
    save_arpa(model, dir + "/model.arpa", corpus.vocab);
    const auto dev = word_sequences(corpus.dev_trees, corpus.vocab);
    std::ofstream log(dir + "/train_log.tsv", std::ios::binary);
    log << "order\tdev_perplexity\n";
    log << config.ngram_order << '\t' << fmt(ngram_perplexity(model, dev)) << '\n';
    return;
  }

  if (family == "recurrent" || family == "attention") {
    const auto train = word_sequences(corpus.train_trees, corpus.vocab);
    const auto dev = word_sequences(corpus.dev_trees, corpus.vocab);
    bool append = false;
    for (int seed : seeds) {
      if (family == "recurrent") {
        nnet::RecurrentLM<float> model(corpus.vocab.size(), presets.recurrent,
                                       static_cast<std::uint64_t>(seed));
        train_and_save(model, family, config, corpus, train, dev, seed, {}, append);
      } else {
        nnet::AttentionLM<float> model(corpus.vocab.size(), presets.attention,
                                       static_cast<std::uint64_t>(seed));
        train_and_save(model, family, config, corpus, train, dev, seed, {}, append);
      }
      append = true;
    }
    return;
  }

  // syntax-supervised families train on oracle action streams
  const synlm::ActionInventory inventory =
      synlm::ActionInventory::from_treebank(corpus.vocab, corpus.train_trees);
  auto streams = [&](const std::vector<ParseTree>& trees) {
    std::vector<std::vector<TokenId>> out;
    out.reserve(trees.size());
    for (const ParseTree& t : trees) out.push_back(synlm::linearize_plm(t, inventory));
    return out;
  };
  const auto train = streams(corpus.train_trees);
  const auto dev = streams(corpus.dev_trees);
  bool append = false;
  for (int seed : seeds) {
    if (family == "rnng") {
      synlm::RnngModel<float> model(&inventory, presets.recurrent,
                                    static_cast<std::uint64_t>(seed));
      train_and_save(model, family, config, corpus, train, dev, seed, inventory.nonterminals(),
                     append);
    } else {
      synlm::PlmModel<float> model(&inventory, presets.attention,
                                   static_cast<std::uint64_t>(seed));
      train_and_save(model, family, config, corpus, train, dev, seed, inventory.nonterminals(),
                     append);
    }
    append = true;
  }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> collect_suite_paths(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("suite directory does not exist: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw ValidationError("no suite files found under " + dir);
  return paths;
}

struct EvalCounters {
  std::int64_t profiles = 0;
  std::int64_t exhausted = 0;
};

evalharness::SurprisalProfile profile_from(const Condition& condition,
                                           const std::string& item_id, const std::string& model,
                                           int seed, std::vector<double> values, bool exhausted,
                                           std::size_t exhausted_at) {
  evalharness::SurprisalProfile p;
  p.item_id = item_id;
  p.condition = condition.name;
  p.model_id = model;
  p.seed = seed;
  p.regions = evalharness::spans_from_regions(condition);
  const std::size_t n = condition.sentence_tokens().size();
  values.resize(n, 0.0);
  p.values = std::move(values);
  p.beam_exhausted = exhausted;
  p.exhausted_at_word = exhausted_at;
  return p;
}

// One evaluation pass of a single (family, seed) model over all suites.
template <class SurprisalFn>
void eval_model(const std::string& family, int seed, const std::vector<TestSuite>& suites,
                const Vocabulary& vocab, const RunConfig& config, SurprisalFn&& surprisal,
                std::vector<evalharness::ResultRow>& rows, EvalCounters& counters) {
  for (const TestSuite& suite : suites) {
    for (const TestItem& item : suite.items) {
      std::map<std::string, evalharness::SurprisalProfile> profiles;
      for (const Condition& condition : item.conditions) {
        const std::vector<TokenId> ids = vocab.to_ids(condition.sentence_tokens());
        bool exhausted = false;
        std::size_t exhausted_at = 0;
        std::vector<double> values;
        try {
          values = surprisal(ids);
        } catch (const BeamExhaustedError& e) {
          exhausted = true;
          exhausted_at = e.word_index;
          ++counters.exhausted;
        }
        ++counters.profiles;
        profiles.emplace(condition.name,
                         profile_from(condition, item.id, family, seed, std::move(values),
                                      exhausted, exhausted_at));
      }
      const evalharness::ItemScore score = evalharness::score_item(item, profiles, config.tie_seed);
      for (std::size_t p = 0; p < item.predictions.size(); ++p) {
        evalharness::ResultRow row;
        row.model = family;
        row.seed = seed;
        row.suite = suite.name;
        row.phenomenon_class = suite.phenomenon_class;
        row.modifier_type = suite.modifier_type;
        row.category = suite.category;
        row.item = item.id;
        row.prediction_index = static_cast<int>(p);
        row.left = item.predictions[p].left;
        row.right = item.predictions[p].right;
        row.left_surprisal = score.left_surprisals[p];
        row.right_surprisal = score.right_surprisals[p];
        row.outcome = score.outcomes[p];
        rows.push_back(std::move(row));
      }
    }
  }
}

void write_diagnostics(const std::string& path, const std::vector<TestSuite>& suites,
                       const Vocabulary& vocab) {
  // classifier-noun nouns are frequency-matched only diagnostically: report
  // the training-frequency ratio of the two compared nouns per item
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write diagnostics: " + path);
  out << "suite\titem\tnoun_a\tnoun_b\tfreq_a\tfreq_b\tratio\n";
  for (const TestSuite& suite : suites) {
    if (suite.phenomenon_class != PhenomenonClass::ClassifierNoun) continue;
    for (const TestItem& item : suite.items) {
      std::vector<std::string> nouns;
      for (const Condition& c : item.conditions) {
        const Region* target = c.find_region("target");
        if (!target || target->tokens.empty()) continue;
        if (std::find(nouns.begin(), nouns.end(), target->tokens.front()) == nouns.end())
          nouns.push_back(target->tokens.front());
      }
      if (nouns.size() != 2) continue;
      const TokenId a = vocab.lookup(nouns[0]);
      const TokenId b = vocab.lookup(nouns[1]);
      const double fa = a >= 0 ? static_cast<double>(vocab.frequency(a)) : 0.0;
      const double fb = b >= 0 ? static_cast<double>(vocab.frequency(b)) : 0.0;
      out << suite.name << '\t' << item.id << '\t' << nouns[0] << '\t' << nouns[1] << '\t'
          << fa << '\t' << fb << '\t' << (fb > 0 ? fmt(fa / fb) : "inf") << '\n';
    }
  }
}

}  // namespace

void cmd_eval(const RunConfig& config) {
  const LoadedCorpus corpus = load_corpus(config);
  const std::vector<std::string> suite_paths = collect_suite_paths(config.suites_dir);
  std::vector<TestSuite> suites;
  suites.reserve(suite_paths.size());
  for (const std::string& p : suite_paths) suites.push_back(load_suite(p));

  std::vector<std::string> families;
  if (!config.model_family.empty()) {
    require_family(config.model_family);
    families.push_back(config.model_family);
  } else {
    if (!fs::is_directory(models_dir(config)))
      throw IoError("no trained models under " + models_dir(config));
    for (const auto& entry : fs::directory_iterator(models_dir(config)))
      if (entry.is_directory()) families.push_back(entry.path().filename().string());
    std::sort(families.begin(), families.end());
  }
  if (families.empty()) throw IoError("no trained models found");

  std::ofstream trace_stream;
  std::ostream* trace = nullptr;
  if (!config.beam_trace.empty()) {
    trace_stream.open(config.beam_trace, std::ios::binary);
    if (!trace_stream) throw IoError("cannot write beam trace: " + config.beam_trace);
    trace = &trace_stream;
  }

  std::vector<evalharness::ResultRow> rows;
  EvalCounters counters;
  wsbeam::BeamConfig beam_config;
  beam_config.action_beam = config.action_beam;
  beam_config.word_beam = config.word_beam;
  beam_config.fast_track = config.fast_track;
  synlm::TransitionLimits limits;
  limits.max_open = config.max_open;

  for (const std::string& family : families) {
    const std::string dir = models_dir(config) + "/" + family;
    if (family == "ngram") {
      const std::string arpa = dir + "/model.arpa";
      if (!fs::exists(arpa)) throw IoError("missing checkpoint: " + arpa);
      const ArpaModel model = load_arpa(arpa, corpus.vocab);
      eval_model(
          family, 1, suites, corpus.vocab, config,
          [&](const std::vector<TokenId>& ids) { return ngram_surprisals(model, ids); }, rows,
          counters);
      continue;
    }
    // neural checkpoints, one per seed
    std::vector<std::string> ckpts;
    if (fs::is_directory(dir))
      for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".ckpt") ckpts.push_back(entry.path().string());
    std::sort(ckpts.begin(), ckpts.end());
    if (ckpts.empty()) throw IoError("missing checkpoint: no .ckpt files under " + dir);
    const Presets presets = preset_dims(config.size_preset);
    for (const std::string& path : ckpts) {
      const nnet::LoadedCheckpoint ck = nnet::read_checkpoint(path);
      const CheckpointConfig meta = CheckpointConfig::from_json(ck.config_json);
      if (meta.vocab_size != corpus.vocab.size())
        throw ValidationError("checkpoint vocabulary size mismatch: " + path);
      if (family == "recurrent") {
        nnet::RecurrentLM<float> model(corpus.vocab.size(), presets.recurrent, 0);
        nnet::fill_params(model.params(), ck);
        eval_model(
            family, meta.seed, suites, corpus.vocab, config,
            [&](const std::vector<TokenId>& ids) { return nnet::lm_surprisals(model, ids); },
            rows, counters);
      } else if (family == "attention") {
        nnet::AttentionLM<float> model(corpus.vocab.size(), presets.attention, 0);
        nnet::fill_params(model.params(), ck);
        eval_model(
            family, meta.seed, suites, corpus.vocab, config,
            [&](const std::vector<TokenId>& ids) { return nnet::lm_surprisals(model, ids); },
            rows, counters);
      } else if (family == "rnng" || family == "plm") {
        const synlm::ActionInventory inventory(corpus.vocab, meta.nonterminals);
        auto run_beam = [&](const auto& model, const std::vector<TokenId>& ids) {
          const auto res = wsbeam::beam_surprisals(model, ids, beam_config, limits, trace);
          return res.surprisals;
        };
        if (family == "rnng") {
          synlm::RnngModel<float> model(&inventory, presets.recurrent, 0);
          nnet::fill_params(model.params(), ck);
          eval_model(
              family, meta.seed, suites, corpus.vocab, config,
              [&](const std::vector<TokenId>& ids) { return run_beam(model, ids); }, rows,
              counters);
        } else {
          synlm::PlmModel<float> model(&inventory, presets.attention, 0);
          nnet::fill_params(model.params(), ck);
          eval_model(
              family, meta.seed, suites, corpus.vocab, config,
              [&](const std::vector<TokenId>& ids) { return run_beam(model, ids); }, rows,
              counters);
        }
      } else {
        throw std::invalid_argument("unknown model directory: " + family);
      }
    }
  }

  fs::create_directories(results_dir(config));
  evalharness::write_results_tsv(results_dir(config) + "/results.tsv", rows);
  write_diagnostics(results_dir(config) + "/item_diagnostics.tsv", suites, corpus.vocab);

  if (counters.profiles > 0) {
    const double fraction =
        static_cast<double>(counters.exhausted) / static_cast<double>(counters.profiles);
    if (fraction > config.beam_exhaustion_tolerance)
      throw BeamExhaustedError("beam exhaustion fraction " + fmt(fraction) +
                                   " above tolerance " + fmt(config.beam_exhaustion_tolerance),
                               static_cast<std::size_t>(counters.exhausted));
  }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

namespace {

// Minimal deterministic SVG bar/line charts.
class SvgChart {
 public:
  SvgChart(int width, int height) : width_(width), height_(height) {
    body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
          << height_ << "\" viewBox=\"0 0 " << width_ << " " << height_ << "\">\n";
    body_ << "<rect width=\"" << width_ << "\" height=\"" << height_ << "\" fill=\"white\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill) {
    body_ << "<rect x=\"" << fmt(x, "%.2f") << "\" y=\"" << fmt(y, "%.2f") << "\" width=\""
          << fmt(w, "%.2f") << "\" height=\"" << fmt(h, "%.2f") << "\" fill=\"" << fill
          << "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0) {
    body_ << "<line x1=\"" << fmt(x1, "%.2f") << "\" y1=\"" << fmt(y1, "%.2f") << "\" x2=\""
          << fmt(x2, "%.2f") << "\" y2=\"" << fmt(y2, "%.2f") << "\" stroke=\"" << stroke
          << "\" stroke-width=\"" << fmt(width, "%.2f") << "\"/>\n";
  }

  void circle(double x, double y, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << fmt(x, "%.2f") << "\" cy=\"" << fmt(y, "%.2f") << "\" r=\""
          << fmt(r, "%.2f") << "\" fill=\"" << fill << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 11,
            const std::string& anchor = "start") {
    body_ << "<text x=\"" << fmt(x, "%.2f") << "\" y=\"" << fmt(y, "%.2f") << "\" font-size=\""
          << size << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s
          << "</text>\n";
  }

  void save(const std::string& path) {
    body_ << "</svg>\n";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write chart: " + path);
    out << body_.str();
  }

 private:
  int width_, height_;
  std::ostringstream body_;
};

const std::vector<std::string> kPalette{"#4477aa", "#ee6677", "#228833",
                                        "#ccbb44", "#66ccee", "#aa3377"};

void chart_grouped_bars(const std::string& path, const std::vector<std::string>& groups,
                        const std::vector<std::string>& series,
                        const std::map<std::pair<std::string, std::string>,
                                       std::array<double, 3>>& values,
                        const std::string& title) {
  const int width = std::max(420, 160 + static_cast<int>(groups.size() * (series.size() + 1)) * 18);
  SvgChart chart(width, 320);
  const double x0 = 50, y0 = 270, plot_h = 220;
  const double plot_w = width - 70;
  chart.text(50, 24, title, 13);
  for (int tick = 0; tick <= 4; ++tick) {
    const double frac = tick / 4.0;
    const double y = y0 - plot_h * frac;
    chart.line(x0, y, x0 + plot_w, y, "#dddddd", 0.5);
    chart.text(x0 - 6, y + 4, fmt(frac, "%.2f"), 10, "end");
  }
  double x = x0 + 10;
  for (const std::string& group : groups) {
    const double group_x = x;
    for (std::size_t s = 0; s < series.size(); ++s) {
      auto it = values.find({group, series[s]});
      if (it != values.end()) {
        const double acc = it->second[0];
        const double lo = it->second[1];
        const double hi = it->second[2];
        const double h = plot_h * acc;
        chart.rect(x, y0 - h, 14, h, kPalette[s % kPalette.size()]);
        chart.line(x + 7, y0 - plot_h * lo, x + 7, y0 - plot_h * hi, "#333333", 1.2);
      }
      x += 18;
    }
    chart.text((group_x + x - 18) / 2, y0 + 16, group, 10, "middle");
    x += 18;
  }
  double lx = x0;
  for (std::size_t s = 0; s < series.size(); ++s) {
    chart.rect(lx, 290, 10, 10, kPalette[s % kPalette.size()]);
    chart.text(lx + 14, 299, series[s], 10);
    lx += 18 + 7.0 * static_cast<double>(series[s].size());
  }
  chart.save(path);
}

void chart_lines(const std::string& path, const std::vector<std::string>& xlabels,
                 const std::vector<std::string>& series,
                 const std::map<std::pair<std::string, std::string>, double>& values,
                 const std::string& title) {
  SvgChart chart(460, 320);
  const double x0 = 50, y0 = 270, plot_h = 220, plot_w = 360;
  chart.text(50, 24, title, 13);
  for (int tick = 0; tick <= 4; ++tick) {
    const double frac = tick / 4.0;
    const double y = y0 - plot_h * frac;
    chart.line(x0, y, x0 + plot_w, y, "#dddddd", 0.5);
    chart.text(x0 - 6, y + 4, fmt(frac, "%.2f"), 10, "end");
  }
  const double step = xlabels.size() > 1 ? plot_w / static_cast<double>(xlabels.size() - 1) : 0;
  for (std::size_t i = 0; i < xlabels.size(); ++i)
    chart.text(x0 + step * static_cast<double>(i), y0 + 16, xlabels[i], 10, "middle");
  for (std::size_t s = 0; s < series.size(); ++s) {
    double prev_x = 0, prev_y = 0;
    bool has_prev = false;
    for (std::size_t i = 0; i < xlabels.size(); ++i) {
      auto it = values.find({xlabels[i], series[s]});
      if (it == values.end()) continue;
      const double x = x0 + step * static_cast<double>(i);
      const double y = y0 - plot_h * it->second;
      chart.circle(x, y, 3, kPalette[s % kPalette.size()]);
      if (has_prev) chart.line(prev_x, prev_y, x, y, kPalette[s % kPalette.size()], 1.5);
      prev_x = x;
      prev_y = y;
      has_prev = true;
    }
  }
  double lx = x0;
  for (std::size_t s = 0; s < series.size(); ++s) {
    chart.rect(lx, 290, 10, 10, kPalette[s % kPalette.size()]);
    chart.text(lx + 14, 299, series[s], 10);
    lx += 18 + 7.0 * static_cast<double>(series[s].size());
  }
  chart.save(path);
}

}  // namespace

void cmd_report(const RunConfig& config) {
  const std::string results_path = results_dir(config) + "/results.tsv";
  const std::vector<evalharness::ResultRow> rows = evalharness::read_results_tsv(results_path);
  if (rows.empty()) throw ValidationError("report: results file has no rows: " + results_path);
  fs::create_directories(report_dir(config));

  std::set<std::string> model_set;
  for (const auto& r : rows) model_set.insert(r.model);
  const std::vector<std::string> models(model_set.begin(), model_set.end());

  // (a) accuracy by class and model, seeds averaged, bootstrap CIs
  evalharness::GroupBy by_class;
  by_class.by_class = true;
  const auto class_accs = evalharness::aggregate(rows, by_class, config.tie_seed);
  {
    std::ofstream out(report_dir(config) + "/accuracy_by_class_model.tsv", std::ios::binary);
    out << "model\tphenomenon_class\taccuracy\tci_lo\tci_hi\titem_count\n";
    for (const auto& a : class_accs)
      out << a.model << '\t' << a.cls << '\t' << fmt(a.accuracy, "%.6f") << '\t'
          << fmt(a.ci_lo, "%.6f") << '\t' << fmt(a.ci_hi, "%.6f") << '\t' << a.item_count << '\n';
    std::vector<std::string> classes;
    std::map<std::pair<std::string, std::string>, std::array<double, 3>> chart_values;
    for (const auto& a : class_accs) {
      if (std::find(classes.begin(), classes.end(), a.cls) == classes.end())
        classes.push_back(a.cls);
      chart_values[{a.cls, a.model}] = {a.accuracy, a.ci_lo, a.ci_hi};
    }
    std::sort(classes.begin(), classes.end());
    chart_grouped_bars(report_dir(config) + "/accuracy_by_class_model.svg", classes, models,
                       chart_values, "Accuracy by test suite class and model (95% CI)");
  }

  // (b) Missing-Object degradation across the modifier ladder
  {
    evalharness::GroupBy by_mod;
    by_mod.by_class = true;
    by_mod.by_modifier = true;
    std::vector<evalharness::ResultRow> mo_rows;
    for (const auto& r : rows)
      if (r.phenomenon_class == PhenomenonClass::MissingObject) mo_rows.push_back(r);
    std::ofstream out(report_dir(config) + "/missing_object_degradation.tsv", std::ios::binary);
    out << "model\tmodifier_type\taccuracy\tdelta_from_none\n";
    if (!mo_rows.empty()) {
      const auto accs = evalharness::aggregate(mo_rows, by_mod, config.tie_seed);
      const std::vector<ModifierType> ladder{ModifierType::None, ModifierType::Src,
                                             ModifierType::CoordinatedSrc,
                                             ModifierType::EmbeddedSrc};
      // keep only models covering the full ladder; others are reported as
      // absent rather than failing the whole report
      std::map<std::string, int> level_count;
      for (const auto& a : accs) ++level_count[a.model];
      std::vector<evalharness::SuiteAccuracy> complete;
      for (const auto& a : accs)
        if (level_count[a.model] == static_cast<int>(ladder.size())) complete.push_back(a);
      if (!complete.empty()) {
        const auto table = evalharness::modifier_degradation(complete, ladder);
        std::vector<std::string> xlabels;
        for (ModifierType m : ladder) xlabels.push_back(to_string(m));
        std::map<std::pair<std::string, std::string>, double> chart_values;
        std::set<std::string> chart_models;
        for (const auto& r : table) {
          out << r.model << '\t' << to_string(r.modifier) << '\t' << fmt(r.accuracy, "%.6f")
              << '\t' << fmt(r.delta_from_baseline, "%.6f") << '\n';
          chart_values[{to_string(r.modifier), r.model}] = r.accuracy;
          chart_models.insert(r.model);
        }
        chart_lines(report_dir(config) + "/missing_object_degradation.svg", xlabels,
                    std::vector<std::string>(chart_models.begin(), chart_models.end()),
                    chart_values, "Missing-object accuracy by modifier complexity");
      } else {
        std::cerr << "report: no model covers the full missing-object ladder\n";
      }
    } else {
      std::cerr << "report: no missing-object rows; degradation table is empty\n";
    }
  }

  // (c) garden-path mean surprisal differences with t-tests
  {
    std::ofstream out(report_dir(config) + "/garden_path_differences.tsv", std::ios::binary);
    out << "model\tphenomenon_class\tn\tmean_difference\tt\tp_t\tp_sign\tci_lo\tci_hi\n";
    bool any = false;
    for (const std::string& model : models) {
      for (PhenomenonClass cls :
           {PhenomenonClass::GardenPathObject, PhenomenonClass::GardenPathSubject}) {
        // per-item mean difference (garden-path minus cued), seeds averaged
        std::map<std::string, std::pair<double, int>> per_item;
        for (const auto& r : rows) {
          if (r.model != model || r.phenomenon_class != cls) continue;
          if (r.outcome == evalharness::PredictionOutcome::Exhausted) continue;
          auto& slot = per_item[r.suite + "\x1f" + r.item];
          slot.first += r.left_surprisal - r.right_surprisal;
          slot.second += 1;
        }
        std::vector<double> diffs;
        diffs.reserve(per_item.size());
        for (const auto& [k, v] : per_item) {
          (void)k;
          diffs.push_back(v.first / static_cast<double>(v.second));
        }
        if (diffs.size() < 2) continue;
        const auto t = evalharness::surprisal_difference_analysis(
            diffs, config.tie_seed ^ fnv1a64(model + to_string(cls)));
        const auto sign = stats::sign_test(diffs);
        out << model << '\t' << to_string(cls) << '\t' << t.n << '\t' << fmt(t.mean, "%.6f")
            << '\t' << fmt(t.statistic, "%.4f") << '\t' << fmt(t.p, "%.6g") << '\t'
            << fmt(sign.p, "%.6g") << '\t' << fmt(t.ci_lo, "%.6f") << '\t'
            << fmt(t.ci_hi, "%.6f") << '\n';
        any = true;
      }
    }
    if (!any) std::cerr << "report: no garden-path rows; difference table is empty\n";
  }

  // (d) syntactic vs semantic comparison
  {
    std::ofstream out(report_dir(config) + "/category_comparison.tsv", std::ios::binary);
    out << "model\tsyntactic_mean\tsemantic_mean\tdifference\tp\tn_syntactic\tn_semantic\n";
    for (const std::string& model : models) {
      std::vector<evalharness::ResultRow> model_rows;
      for (const auto& r : rows)
        if (r.model == model) model_rows.push_back(r);
      try {
        const auto cmp = evalharness::category_comparison(
            model_rows, config.tie_seed ^ fnv1a64(model));
        out << model << '\t' << fmt(cmp.syntactic_mean, "%.6f") << '\t'
            << fmt(cmp.semantic_mean, "%.6f") << '\t' << fmt(cmp.difference, "%.6f") << '\t'
            << fmt(cmp.p, "%.6g") << '\t' << cmp.n_syntactic << '\t' << cmp.n_semantic << '\n';
      } catch (const std::invalid_argument&) {
        std::cerr << "report: model " << model << " lacks a category; skipped in comparison\n";
      }
    }
  }
}

int run_command(const std::string& command, const RunConfig& config, std::string* error_out) {
  try {
    if (command == "preprocess") {
      cmd_preprocess(config);
    } else if (command == "train") {
      cmd_train(config);
    } else if (command == "eval") {
      cmd_eval(config);
    } else if (command == "report") {
      cmd_report(config);
    } else {
      if (error_out) *error_out = "unknown command: " + command;
      return 2;
    }
    return 0;
  } catch (const TrainingError& e) {
    if (error_out) *error_out = e.what();
    return 4;
  } catch (const BeamExhaustedError& e) {
    if (error_out) *error_out = e.what();
    return 5;
  } catch (const IoError& e) {
    if (error_out) *error_out = e.what();
    return 3;
  } catch (const ValidationError& e) {
    if (error_out) *error_out = e.what();
    return 2;
  } catch (const std::invalid_argument& e) {
    if (error_out) *error_out = e.what();
    return 2;
  }
}

}  // namespace syneval::pipeline
