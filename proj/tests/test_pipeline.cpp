#include "syneval/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "syneval/evalharness.hpp"
#include "syneval/suite.hpp"
#include "syneval/synthgen.hpp"
#include "syneval/treebank.hpp"

using namespace syneval;
using namespace syneval::pipeline;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& stem) : path(fs::path("tmp_" + stem)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const {
    return sub.empty() ? path.string() : (path / sub).string();
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Small deterministic synthetic setup shared by the tests.
synthgen::SynthOutput small_synth() {
  synthgen::SynthConfig cfg;
  cfg.sentences = 240;
  cfg.dev_sentences = 60;
  cfg.seed = 99;
  cfg.items_per_suite = 3;
  return synthgen::generate(cfg);
}

RunConfig base_config(const TempDir& dir, const std::string& synth_dir) {
  RunConfig c;
  c.corpus_train = synth_dir + "/train.trees";
  c.corpus_dev = synth_dir + "/dev.trees";
  c.suites_dir = synth_dir + "/suites/planted";
  c.out_dir = dir.str("out");
  c.epochs = 1;
  return c;
}

}  // namespace

TEST_CASE("config json parsing and defaults") {
  const std::string text = R"({
    "corpus": {"train": "a.trees", "dev": "b.trees"},
    "suites": "s", "out": "o", "model": "rnng", "preset": "desk",
    "seeds": [4, 5], "action_beam": 50, "word_beam": 5,
    "tie_seed": 99, "epochs": 3, "learning_rate": 0.01
  })";
  const RunConfig c = config_from_json(text, "<test>");
  CHECK(c.corpus_train == "a.trees");
  CHECK(c.corpus_dev == "b.trees");
  CHECK(c.model_family == "rnng");
  CHECK(c.seeds == std::vector<int>{4, 5});
  CHECK(c.action_beam == 50);
  CHECK(c.word_beam == 5);
  CHECK(c.tie_seed == 99);
  CHECK(c.epochs == 3);
  CHECK(c.training.learning_rate == 0.01);
  CHECK(c.learning_rate_set);
  CHECK_THROWS_AS(config_from_json("{oops", "<test>"), ValidationError);

  CHECK(default_seeds("rnng") == std::vector<int>{1, 2});
  CHECK(default_seeds("recurrent") == std::vector<int>{1, 2, 3});
  CHECK(default_seeds("ngram") == std::vector<int>{1});
}

TEST_CASE("preprocess writes deterministic artifacts with a consistent recount") {
  TempDir dir("preprocess");
  const auto synth = small_synth();
  synthgen::write_synth(synth, dir.str("synth"));
  RunConfig config = base_config(dir, dir.str("synth"));

  cmd_preprocess(config);
  const std::string stats = read_file(config.out_dir + "/corpus/stats.tsv");
  // recount oracle: token_count equals the histogram sum of the rewritten corpus
  const auto trees = read_treebank_file(config.out_dir + "/corpus/train.trees");
  std::int64_t tokens = 0;
  for (const auto& t : trees) tokens += static_cast<std::int64_t>(leaves(t).tokens.size());
  CHECK(stats.find("token_count\t" + std::to_string(tokens)) != std::string::npos);

  SUBCASE("rerun is byte-identical") {
    const std::string vocab1 = read_file(config.out_dir + "/corpus/vocab.tsv");
    const std::string trees1 = read_file(config.out_dir + "/corpus/train.trees");
    const std::string actions1 = read_file(config.out_dir + "/corpus/train.actions");
    cmd_preprocess(config);
    CHECK(read_file(config.out_dir + "/corpus/vocab.tsv") == vocab1);
    CHECK(read_file(config.out_dir + "/corpus/train.trees") == trees1);
    CHECK(read_file(config.out_dir + "/corpus/train.actions") == actions1);
  }
  SUBCASE("max_len 1 leaves nothing and errors") {
    config.max_len = 1;
    CHECK_THROWS_AS(cmd_preprocess(config), ValidationError);
  }
  SUBCASE("unreadable input is an io error") {
    config.corpus_train = dir.str("nope.trees");
    CHECK_THROWS_AS(cmd_preprocess(config), IoError);
  }
}

TEST_CASE("train/eval pipeline on a small corpus") {
  TempDir dir("trainer");
  const auto synth = small_synth();
  synthgen::write_synth(synth, dir.str("synth"));
  RunConfig config = base_config(dir, dir.str("synth"));
  cmd_preprocess(config);

  SUBCASE("train requires a family") {
    CHECK_THROWS_AS(cmd_train(config), std::invalid_argument);
  }

  SUBCASE("ngram training writes a single arpa artifact") {
    config.model_family = "ngram";
    config.epochs = 7;  // ignored by the n-gram path
    cmd_train(config);
    CHECK(fs::exists(config.out_dir + "/models/ngram/model.arpa"));
    CHECK(!fs::exists(config.out_dir + "/models/ngram/seed1.ckpt"));
  }

  SUBCASE("neural training writes one checkpoint per seed, deterministically") {
    config.model_family = "recurrent";
    config.seeds = {1, 2};
    cmd_train(config);
    CHECK(fs::exists(config.out_dir + "/models/recurrent/seed1.ckpt"));
    CHECK(fs::exists(config.out_dir + "/models/recurrent/seed2.ckpt"));
    const std::string ck1 = read_file(config.out_dir + "/models/recurrent/seed1.ckpt");
    const std::string log1 = read_file(config.out_dir + "/models/recurrent/train_log.tsv");
    cmd_train(config);
    CHECK(read_file(config.out_dir + "/models/recurrent/seed1.ckpt") == ck1);
    CHECK(read_file(config.out_dir + "/models/recurrent/train_log.tsv") == log1);
  }

  SUBCASE("eval requires checkpoints and suites") {
    config.model_family = "recurrent";
    CHECK_THROWS_AS(cmd_eval(config), IoError);
    config.model_family.clear();
    CHECK_THROWS_AS(cmd_eval(config), IoError);
  }

  SUBCASE("eval aborts on an invalid suite file") {
    config.model_family = "ngram";
    cmd_train(config);
    fs::create_directories(dir.str("badsuites"));
    std::ofstream bad(dir.str("badsuites") + "/broken.json");
    bad << "{\"name\": \"x\"}";
    bad.close();
    config.suites_dir = dir.str("badsuites");
    CHECK_THROWS_AS(cmd_eval(config), ValidationError);
  }

  SUBCASE("end-to-end scoring, reporting, and determinism") {
    config.model_family = "ngram";
    cmd_train(config);
    config.model_family = "recurrent";
    config.seeds = {1};
    cmd_train(config);
    config.model_family.clear();
    cmd_eval(config);
    const std::string results_path = config.out_dir + "/results/results.tsv";
    REQUIRE(fs::exists(results_path));
    const auto rows = evalharness::read_results_tsv(results_path);
    CHECK(!rows.empty());
    // both models present
    bool has_ngram = false, has_recurrent = false;
    for (const auto& r : rows) {
      if (r.model == "ngram") has_ngram = true;
      if (r.model == "recurrent") has_recurrent = true;
    }
    CHECK(has_ngram);
    CHECK(has_recurrent);
    CHECK(fs::exists(config.out_dir + "/results/item_diagnostics.tsv"));

    cmd_report(config);
    for (const char* name :
         {"accuracy_by_class_model.tsv", "missing_object_degradation.tsv",
          "garden_path_differences.tsv", "category_comparison.tsv",
          "accuracy_by_class_model.svg", "missing_object_degradation.svg"})
      CHECK(fs::exists(config.out_dir + "/report/" + std::string(name)));

    // rerun eval+report: byte-identical artifacts
    const std::string results1 = read_file(results_path);
    const std::string table1 = read_file(config.out_dir + "/report/accuracy_by_class_model.tsv");
    const std::string chart1 = read_file(config.out_dir + "/report/accuracy_by_class_model.svg");
    cmd_eval(config);
    cmd_report(config);
    CHECK(read_file(results_path) == results1);
    CHECK(read_file(config.out_dir + "/report/accuracy_by_class_model.tsv") == table1);
    CHECK(read_file(config.out_dir + "/report/accuracy_by_class_model.svg") == chart1);
  }
}

TEST_CASE("report tables match hand-computed values") {
  TempDir dir("report");
  // synthetic results: model m1, class missing-object at two modifier levels
  std::vector<evalharness::ResultRow> rows;
  auto push = [&](const std::string& suite, ModifierType mod, const std::string& item,
                  bool success) {
    evalharness::ResultRow r;
    r.model = "m1";
    r.seed = 1;
    r.suite = suite;
    r.phenomenon_class = PhenomenonClass::MissingObject;
    r.modifier_type = mod;
    r.category = SuiteCategory::Syntactic;
    r.item = item;
    r.prediction_index = 0;
    r.left = {"without-object", "target"};
    r.right = {"with-object", "target"};
    r.left_surprisal = success ? 2.0 : 1.0;
    r.right_surprisal = 1.5;
    r.outcome = success ? evalharness::PredictionOutcome::Success
                        : evalharness::PredictionOutcome::Failure;
    return rows.push_back(r);
  };
  for (int i = 0; i < 4; ++i) push("mo-none", ModifierType::None, "i" + std::to_string(i), true);
  for (int i = 0; i < 4; ++i)
    push("mo-src", ModifierType::Src, "j" + std::to_string(i), i < 2);  // 0.5
  // semantic rows so the category comparison has both groups
  for (int i = 0; i < 4; ++i) {
    evalharness::ResultRow r;
    r.model = "m1";
    r.seed = 1;
    r.suite = "vn";
    r.phenomenon_class = PhenomenonClass::VerbNoun;
    r.modifier_type = ModifierType::None;
    r.category = SuiteCategory::Semantic;
    r.item = "v" + std::to_string(i);
    r.left = {"inconsistent", "target"};
    r.right = {"consistent", "target"};
    r.outcome = i < 1 ? evalharness::PredictionOutcome::Success
                      : evalharness::PredictionOutcome::Failure;  // 0.25
    rows.push_back(r);
  }
  RunConfig config;
  config.out_dir = dir.str("out");
  fs::create_directories(config.out_dir + "/results");
  evalharness::write_results_tsv(config.out_dir + "/results/results.tsv", rows);
  cmd_report(config);
  const std::string acc = read_file(config.out_dir + "/report/accuracy_by_class_model.tsv");
  // missing-object pooled over both suites: 6/8 = 0.75; verb-noun 0.25
  CHECK(acc.find("m1\tmissing-object\t0.750000") != std::string::npos);
  CHECK(acc.find("m1\tverb-noun\t0.250000") != std::string::npos);
  const std::string cat = read_file(config.out_dir + "/report/category_comparison.tsv");
  // syntactic 0.75 vs semantic 0.25 -> difference 0.5
  CHECK(cat.find("0.750000\t0.250000\t0.500000") != std::string::npos);
}

TEST_CASE("report fails cleanly without results") {
  TempDir dir("noresults");
  RunConfig config;
  config.out_dir = dir.str("out");
  CHECK_THROWS_AS(cmd_report(config), IoError);
  fs::create_directories(config.out_dir + "/results");
  std::ofstream out(config.out_dir + "/results/results.tsv");
  out << "model\tseed\n";
  out.close();
  CHECK_THROWS_AS(cmd_report(config), ValidationError);
}

TEST_CASE("cli binary maps errors to exit codes") {
#ifdef SYNEVAL_CLI
  const std::string cli = SYNEVAL_CLI;
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  TempDir dir("cli");
  // missing corpus -> io error
  CHECK(run("preprocess --corpus " + dir.str("missing.trees") + " --out " + dir.str("out")) == 3);
  // bad model family -> validation error
  {
    const auto synth = small_synth();
    synthgen::write_synth(synth, dir.str("synth"));
    CHECK(run("preprocess --corpus " + dir.str("synth/train.trees") + " --out " + dir.str("out")) ==
          0);
    CHECK(run("train --model zebra --out " + dir.str("out")) == 2);
    CHECK(run("train --model ngram --out " + dir.str("out")) == 0);
    // eval on a suite dir that does not exist -> io error
    CHECK(run("eval --suites " + dir.str("nope") + " --out " + dir.str("out")) == 3);
    CHECK(run("eval --suites " + dir.str("synth/suites/planted") + " --out " + dir.str("out")) ==
          0);
    CHECK(run("report --out " + dir.str("out")) == 0);
  }
#endif
}
