#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "syneval/stats.hpp"
#include "syneval/suite.hpp"

namespace syneval::evalharness {

// Per-token surprisal values for one condition of one item under one model,
// with named region spans partitioning the token sequence.
struct RegionSpan {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;  // half-open
};

struct SurprisalProfile {
  std::string item_id;
  std::string condition;
  std::string model_id;
  int seed = 0;
  std::vector<double> values;  // natural log units
  std::vector<RegionSpan> regions;
  bool beam_exhausted = false;
  std::size_t exhausted_at_word = 0;
};

// Builds the spans from region token counts, in order.
std::vector<RegionSpan> spans_from_regions(const Condition& condition);

// Sum of per-token surprisals over a region; empty region -> 0.
double region_surprisal(const SurprisalProfile& profile, const std::string& region);

enum class PredictionOutcome { Success, Failure, TieCoinSuccess, TieCoinFailure, Exhausted };

const char* to_string(PredictionOutcome o);

struct ItemScore {
  std::string item_id;
  std::vector<PredictionOutcome> outcomes;
  std::vector<double> left_surprisals;   // operands, for reporting
  std::vector<double> right_surprisals;
  double aggregate = 0.0;  // mean of outcomes mapped to {1, 0}
};

// Scores every prediction: success iff left region surprisal strictly
// exceeds right; exact ties resolved by a fair coin keyed on
// (tie_seed, item id, prediction index); beam-exhausted operands fail with a
// distinct outcome.
ItemScore score_item(const TestItem& item,
                     const std::map<std::string, SurprisalProfile>& profiles,
                     std::uint64_t tie_seed);

// One row per (model, seed, suite, item, prediction) for the results file.
struct ResultRow {
  std::string model;
  int seed = 0;
  std::string suite;
  PhenomenonClass phenomenon_class = PhenomenonClass::ClassifierNoun;
  ModifierType modifier_type = ModifierType::None;
  SuiteCategory category = SuiteCategory::Semantic;
  std::string item;
  int prediction_index = 0;
  RegionRef left, right;
  double left_surprisal = 0.0;
  double right_surprisal = 0.0;
  PredictionOutcome outcome = PredictionOutcome::Failure;
};

void write_results_tsv(const std::string& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_tsv(const std::string& path);

// Grouping flags for aggregation; model is always part of the key. Without
// by_seed, item scores are first averaged within seed, then across seeds.
struct GroupBy {
  bool by_class = false;
  bool by_modifier = false;
  bool by_suite = false;
  bool by_category = false;
  bool by_seed = false;
};

struct SuiteAccuracy {
  std::string model;
  std::string suite;         // set when by_suite
  std::string cls;           // set when by_class
  std::string modifier;      // set when by_modifier
  std::string category;      // set when by_category
  std::optional<int> seed;   // nullopt = seed-mean
  double accuracy = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int item_count = 0;
};

// Mean accuracy per group with a 95% nonparametric bootstrap CI over items
// (percentile method). Deterministic for a fixed bootstrap_seed.
std::vector<SuiteAccuracy> aggregate(const std::vector<ResultRow>& rows, const GroupBy& group_by,
                                     std::uint64_t bootstrap_seed, int resamples = 10000);

// Mean target-region surprisal difference (left pair member minus right) with
// a two-sided one-sample t-test and bootstrap CI; n < 2 is an error.
stats::StatResult surprisal_difference_analysis(const std::vector<double>& per_item_differences,
                                                std::uint64_t bootstrap_seed);

struct DegradationRow {
  std::string model;
  ModifierType modifier = ModifierType::None;
  double accuracy = 0.0;
  double delta_from_baseline = 0.0;  // accuracy minus the no-modifier accuracy
};

// Accuracy per modifier level plus delta from the no-modifier baseline, per
// model; missing levels are an error.
std::vector<DegradationRow> modifier_degradation(const std::vector<SuiteAccuracy>& results,
                                                 const std::vector<ModifierType>& order);

struct CategoryComparison {
  double syntactic_mean = 0.0;
  double semantic_mean = 0.0;
  double difference = 0.0;  // syntactic - semantic
  double p = 1.0;           // two-sided bootstrap over items
  int n_syntactic = 0;
  int n_semantic = 0;
};

// Syntactic vs semantic accuracy over item scores; garden-path (hybrid) rows
// are excluded from both groups.
CategoryComparison category_comparison(const std::vector<ResultRow>& rows,
                                       std::uint64_t bootstrap_seed, int resamples = 10000);

// Item-level aggregates derived from result rows (used by reports and tests).
struct ItemAggregate {
  std::string model;
  int seed = 0;
  std::string suite;
  PhenomenonClass phenomenon_class;
  ModifierType modifier_type;
  SuiteCategory category;
  std::string item;
  double score = 0.0;
};

std::vector<ItemAggregate> collapse_items(const std::vector<ResultRow>& rows);

}  // namespace syneval::evalharness
