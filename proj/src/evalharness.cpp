#include "syneval/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "syneval/errors.hpp"
#include "syneval/rng.hpp"

namespace syneval::evalharness {

std::vector<RegionSpan> spans_from_regions(const Condition& condition) {
  std::vector<RegionSpan> spans;
  std::size_t at = 0;
  for (const Region& r : condition.regions) {
    spans.push_back({r.name, at, at + r.tokens.size()});
    at += r.tokens.size();
  }
  return spans;
}

double region_surprisal(const SurprisalProfile& profile, const std::string& region) {
  for (const RegionSpan& span : profile.regions) {
    if (span.name != region) continue;
    double sum = 0.0;
    for (std::size_t i = span.begin; i < span.end; ++i) sum += profile.values.at(i);
    return sum;
  }
  throw std::invalid_argument("region_surprisal: unknown region '" + region + "'");
}

const char* to_string(PredictionOutcome o) {
  switch (o) {
    case PredictionOutcome::Success: return "success";
    case PredictionOutcome::Failure: return "failure";
    case PredictionOutcome::TieCoinSuccess: return "tie-coinflip-success";
    case PredictionOutcome::TieCoinFailure: return "tie-coinflip-failure";
    case PredictionOutcome::Exhausted: return "exhausted";
  }
  return "?";
}

namespace {

PredictionOutcome outcome_from_string(const std::string& s) {
  for (PredictionOutcome o :
       {PredictionOutcome::Success, PredictionOutcome::Failure, PredictionOutcome::TieCoinSuccess,
        PredictionOutcome::TieCoinFailure, PredictionOutcome::Exhausted})
    if (s == to_string(o)) return o;
  throw ValidationError("unknown outcome: " + s);
}

bool outcome_success(PredictionOutcome o) {
  return o == PredictionOutcome::Success || o == PredictionOutcome::TieCoinSuccess;
}

}  // namespace

ItemScore score_item(const TestItem& item,
                     const std::map<std::string, SurprisalProfile>& profiles,
                     std::uint64_t tie_seed) {
  ItemScore score;
  score.item_id = item.id;
  double sum = 0.0;
  for (std::size_t p = 0; p < item.predictions.size(); ++p) {
    const Prediction& pred = item.predictions[p];
    auto lit = profiles.find(pred.left.condition);
    auto rit = profiles.find(pred.right.condition);
    if (lit == profiles.end() || rit == profiles.end())
      throw std::invalid_argument("score_item: missing condition profile for item " + item.id);
    PredictionOutcome outcome;
    double ls = 0.0, rs = 0.0;
    if (lit->second.beam_exhausted || rit->second.beam_exhausted) {
      outcome = PredictionOutcome::Exhausted;
    } else {
      ls = region_surprisal(lit->second, pred.left.region);
      rs = region_surprisal(rit->second, pred.right.region);
      if (ls > rs) {
        outcome = PredictionOutcome::Success;
      } else if (ls < rs) {
        outcome = PredictionOutcome::Failure;
      } else {
        outcome = keyed_coin(tie_seed, item.id, p) ? PredictionOutcome::TieCoinSuccess
                                                   : PredictionOutcome::TieCoinFailure;
      }
    }
    score.outcomes.push_back(outcome);
    score.left_surprisals.push_back(ls);
    score.right_surprisals.push_back(rs);
    sum += outcome_success(outcome) ? 1.0 : 0.0;
  }
  score.aggregate = score.outcomes.empty() ? 0.0 : sum / static_cast<double>(score.outcomes.size());
  return score;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace

void write_results_tsv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write results: " + path);
  out << "model\tseed\tsuite\tphenomenon_class\tmodifier_type\tcategory\titem\tprediction\t"
         "left_condition\tleft_region\tright_condition\tright_region\t"
         "left_surprisal\tright_surprisal\toutcome\n";
  for (const ResultRow& r : rows) {
    out << r.model << '\t' << r.seed << '\t' << r.suite << '\t' << to_string(r.phenomenon_class)
        << '\t' << to_string(r.modifier_type) << '\t' << to_string(r.category) << '\t' << r.item
        << '\t' << r.prediction_index << '\t' << r.left.condition << '\t' << r.left.region << '\t'
        << r.right.condition << '\t' << r.right.region << '\t' << fmt_double(r.left_surprisal)
        << '\t' << fmt_double(r.right_surprisal) << '\t' << to_string(r.outcome) << '\n';
  }
}

std::vector<ResultRow> read_results_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open results: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty results file: " + path);
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_tabs(line);
    if (f.size() != 15) throw ValidationError("malformed results row: " + line);
    ResultRow r;
    r.model = f[0];
    r.seed = std::stoi(f[1]);
    r.suite = f[2];
    r.phenomenon_class = phenomenon_from_string(f[3]);
    r.modifier_type = modifier_from_string(f[4]);
    r.category = category_from_string(f[5]);
    r.item = f[6];
    r.prediction_index = std::stoi(f[7]);
    r.left = {f[8], f[9]};
    r.right = {f[10], f[11]};
    r.left_surprisal = std::stod(f[12]);
    r.right_surprisal = std::stod(f[13]);
    r.outcome = outcome_from_string(f[14]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ItemAggregate> collapse_items(const std::vector<ResultRow>& rows) {
  // rows arrive grouped by construction; aggregate per (model, seed, suite, item)
  std::map<std::tuple<std::string, int, std::string, std::string>,
           std::pair<ItemAggregate, std::pair<double, int>>>
      acc;
  for (const ResultRow& r : rows) {
    auto key = std::make_tuple(r.model, r.seed, r.suite, r.item);
    auto it = acc.find(key);
    if (it == acc.end()) {
      ItemAggregate agg;
      agg.model = r.model;
      agg.seed = r.seed;
      agg.suite = r.suite;
      agg.phenomenon_class = r.phenomenon_class;
      agg.modifier_type = r.modifier_type;
      agg.category = r.category;
      agg.item = r.item;
      it = acc.emplace(key, std::make_pair(agg, std::make_pair(0.0, 0))).first;
    }
    it->second.second.first += outcome_success(r.outcome) ? 1.0 : 0.0;
    it->second.second.second += 1;
  }
  std::vector<ItemAggregate> out;
  out.reserve(acc.size());
  for (auto& [key, v] : acc) {
    (void)key;
    v.first.score = v.second.first / static_cast<double>(v.second.second);
    out.push_back(v.first);
  }
  return out;
}

std::vector<SuiteAccuracy> aggregate(const std::vector<ResultRow>& rows, const GroupBy& group_by,
                                     std::uint64_t bootstrap_seed, int resamples) {
  const std::vector<ItemAggregate> items = collapse_items(rows);

  auto group_key = [&](const ItemAggregate& it) {
    std::string key = it.model;
    if (group_by.by_class) key += "\x1f" + std::string(to_string(it.phenomenon_class));
    if (group_by.by_modifier) key += "\x1f" + std::string(to_string(it.modifier_type));
    if (group_by.by_suite) key += "\x1f" + it.suite;
    if (group_by.by_category) key += "\x1f" + std::string(to_string(it.category));
    if (group_by.by_seed) key += "\x1f" + std::to_string(it.seed);
    return key;
  };

  // Within a group, pool per-item scores; without by_seed the same item id
  // appears once per seed and is averaged across seeds first.
  struct GroupData {
    const ItemAggregate* sample = nullptr;
    std::map<std::string, std::pair<double, int>> per_item;  // (suite, item) -> sum, n
  };
  std::map<std::string, GroupData> groups;
  for (const ItemAggregate& it : items) {
    GroupData& gd = groups[group_key(it)];
    if (!gd.sample) gd.sample = &it;
    auto& slot = gd.per_item[it.suite + "\x1f" + it.item];
    slot.first += it.score;
    slot.second += 1;
  }

  std::vector<SuiteAccuracy> out;
  for (const auto& [key, gd] : groups) {
    std::vector<double> item_scores;
    item_scores.reserve(gd.per_item.size());
    for (const auto& [ik, sv] : gd.per_item) {
      (void)ik;
      item_scores.push_back(sv.first / static_cast<double>(sv.second));
    }
    SuiteAccuracy acc;
    acc.model = gd.sample->model;
    if (group_by.by_class) acc.cls = to_string(gd.sample->phenomenon_class);
    if (group_by.by_modifier) acc.modifier = to_string(gd.sample->modifier_type);
    if (group_by.by_suite) acc.suite = gd.sample->suite;
    if (group_by.by_category) acc.category = to_string(gd.sample->category);
    if (group_by.by_seed) acc.seed = gd.sample->seed;
    acc.item_count = static_cast<int>(item_scores.size());
    double mean = 0.0;
    for (double s : item_scores) mean += s;
    mean /= static_cast<double>(item_scores.size());
    acc.accuracy = mean;
    const auto [lo, hi] = stats::bootstrap_ci_mean(
        item_scores, resamples, 0.95, bootstrap_seed ^ fnv1a64(key));
    acc.ci_lo = lo;
    acc.ci_hi = hi;
    out.push_back(std::move(acc));
  }
  return out;
}

stats::StatResult surprisal_difference_analysis(const std::vector<double>& per_item_differences,
                                                std::uint64_t bootstrap_seed) {
  if (per_item_differences.size() < 2)
    throw std::invalid_argument("surprisal_difference_analysis: need at least 2 items");
  stats::StatResult r = stats::one_sample_t(per_item_differences);
  const auto [lo, hi] =
      stats::bootstrap_ci_mean(per_item_differences, 10000, 0.95, bootstrap_seed);
  r.ci_lo = lo;
  r.ci_hi = hi;
  return r;
}

std::vector<DegradationRow> modifier_degradation(const std::vector<SuiteAccuracy>& results,
                                                 const std::vector<ModifierType>& order) {
  std::set<std::string> models;
  for (const SuiteAccuracy& r : results) models.insert(r.model);
  std::vector<DegradationRow> out;
  for (const std::string& model : models) {
    auto find_level = [&](ModifierType m) -> const SuiteAccuracy* {
      for (const SuiteAccuracy& r : results)
        if (r.model == model && r.modifier == to_string(m)) return &r;
      return nullptr;
    };
    const SuiteAccuracy* base = find_level(order.front());
    if (!base)
      throw std::invalid_argument("modifier_degradation: missing baseline level for " + model);
    for (ModifierType m : order) {
      const SuiteAccuracy* r = find_level(m);
      if (!r)
        throw std::invalid_argument(std::string("modifier_degradation: missing level '") +
                                    to_string(m) + "' for " + model);
      out.push_back({model, m, r->accuracy, r->accuracy - base->accuracy});
    }
  }
  return out;
}

CategoryComparison category_comparison(const std::vector<ResultRow>& rows,
                                       std::uint64_t bootstrap_seed, int resamples) {
  const std::vector<ItemAggregate> items = collapse_items(rows);
  // seed-mean per item first
  std::map<std::string, std::pair<double, int>> syn, sem;
  for (const ItemAggregate& it : items) {
    if (it.category == SuiteCategory::Hybrid) continue;
    auto& dst = it.category == SuiteCategory::Syntactic ? syn : sem;
    auto& slot = dst[it.model + "\x1f" + it.suite + "\x1f" + it.item];
    slot.first += it.score;
    slot.second += 1;
  }
  if (syn.empty() || sem.empty())
    throw std::invalid_argument("category_comparison: both categories must be present");
  auto to_scores = [](const std::map<std::string, std::pair<double, int>>& m) {
    std::vector<double> out;
    out.reserve(m.size());
    for (const auto& [k, v] : m) {
      (void)k;
      out.push_back(v.first / static_cast<double>(v.second));
    }
    return out;
  };
  const std::vector<double> syn_scores = to_scores(syn);
  const std::vector<double> sem_scores = to_scores(sem);

  CategoryComparison cmp;
  cmp.n_syntactic = static_cast<int>(syn_scores.size());
  cmp.n_semantic = static_cast<int>(sem_scores.size());
  for (double s : syn_scores) cmp.syntactic_mean += s;
  cmp.syntactic_mean /= static_cast<double>(syn_scores.size());
  for (double s : sem_scores) cmp.semantic_mean += s;
  cmp.semantic_mean /= static_cast<double>(sem_scores.size());
  cmp.difference = cmp.syntactic_mean - cmp.semantic_mean;

  Rng rng(bootstrap_seed);
  int le = 0, ge = 0;
  for (int b = 0; b < resamples; ++b) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < syn_scores.size(); ++i)
      s1 += syn_scores[rng.next_below(syn_scores.size())];
    for (std::size_t i = 0; i < sem_scores.size(); ++i)
      s2 += sem_scores[rng.next_below(sem_scores.size())];
    const double d = s1 / static_cast<double>(syn_scores.size()) -
                     s2 / static_cast<double>(sem_scores.size());
    if (d <= 0) ++le;
    if (d >= 0) ++ge;
  }
  const double p_lo = static_cast<double>(le + 1) / static_cast<double>(resamples + 1);
  const double p_hi = static_cast<double>(ge + 1) / static_cast<double>(resamples + 1);
  cmp.p = std::min(1.0, 2.0 * std::min(p_lo, p_hi));
  return cmp;
}

}  // namespace syneval::evalharness
