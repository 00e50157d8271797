#include "syneval/suite.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace syneval {

using nlohmann::json;

const char* to_string(PhenomenonClass c) {
  switch (c) {
    case PhenomenonClass::ClassifierNoun: return "classifier-noun";
    case PhenomenonClass::GardenPathObject: return "garden-path-object";
    case PhenomenonClass::GardenPathSubject: return "garden-path-subject";
    case PhenomenonClass::VerbNoun: return "verb-noun";
    case PhenomenonClass::MissingObject: return "missing-object";
    case PhenomenonClass::Subordination: return "subordination";
  }
  return "?";
}

const char* to_string(ModifierType m) {
  switch (m) {
    case ModifierType::None: return "none";
    case ModifierType::Adjective: return "adjective";
    case ModifierType::Orc: return "orc";
    case ModifierType::Src: return "src";
    case ModifierType::CoordinatedSrc: return "coordinated-src";
    case ModifierType::EmbeddedSrc: return "embedded-src";
  }
  return "?";
}

const char* to_string(SuiteCategory c) {
  switch (c) {
    case SuiteCategory::Syntactic: return "syntactic";
    case SuiteCategory::Semantic: return "semantic";
    case SuiteCategory::Hybrid: return "hybrid";
  }
  return "?";
}

PhenomenonClass phenomenon_from_string(const std::string& s) {
  for (PhenomenonClass c :
       {PhenomenonClass::ClassifierNoun, PhenomenonClass::GardenPathObject,
        PhenomenonClass::GardenPathSubject, PhenomenonClass::VerbNoun,
        PhenomenonClass::MissingObject, PhenomenonClass::Subordination})
    if (s == to_string(c)) return c;
  throw std::invalid_argument("unknown phenomenon class: " + s);
}

ModifierType modifier_from_string(const std::string& s) {
  for (ModifierType m : {ModifierType::None, ModifierType::Adjective, ModifierType::Orc,
                         ModifierType::Src, ModifierType::CoordinatedSrc, ModifierType::EmbeddedSrc})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown modifier type: " + s);
}

SuiteCategory category_from_string(const std::string& s) {
  for (SuiteCategory c : {SuiteCategory::Syntactic, SuiteCategory::Semantic, SuiteCategory::Hybrid})
    if (s == to_string(c)) return c;
  throw std::invalid_argument("unknown category: " + s);
}

SuiteCategory canonical_category(PhenomenonClass c) {
  switch (c) {
    case PhenomenonClass::MissingObject:
    case PhenomenonClass::Subordination: return SuiteCategory::Syntactic;
    case PhenomenonClass::ClassifierNoun:
    case PhenomenonClass::VerbNoun: return SuiteCategory::Semantic;
    default: return SuiteCategory::Hybrid;
  }
}

std::vector<std::string> Condition::sentence_tokens() const {
  std::vector<std::string> out;
  for (const Region& r : regions) out.insert(out.end(), r.tokens.begin(), r.tokens.end());
  return out;
}

const Region* Condition::find_region(const std::string& rname) const {
  for (const Region& r : regions)
    if (r.name == rname) return &r;
  return nullptr;
}

const Condition* TestItem::find_condition(const std::string& cname) const {
  for (const Condition& c : conditions)
    if (c.name == cname) return &c;
  return nullptr;
}

std::vector<Prediction> standard_predictions(PhenomenonClass cls,
                                             const std::vector<std::string>& conditions,
                                             const std::string& target_region) {
  auto pred = [&](const std::string& hi, const std::string& lo) {
    return Prediction{{hi, target_region}, {lo, target_region}};
  };
  switch (cls) {
    case PhenomenonClass::ClassifierNoun: {
      if (conditions.size() != 4)
        throw std::invalid_argument("classifier-noun expects 4 conditions");
      // Congruent/incongruent grid in schema order [a, b, c, d] where b and d
      // are the incongruent cells: b>a and d>c share the target noun, d>a and
      // b>c share the stimulus prefix.
      return {pred(conditions[1], conditions[0]), pred(conditions[3], conditions[2]),
              pred(conditions[3], conditions[0]), pred(conditions[1], conditions[2])};
    }
    case PhenomenonClass::GardenPathObject:
    case PhenomenonClass::GardenPathSubject:
    case PhenomenonClass::VerbNoun:
    case PhenomenonClass::MissingObject:
    case PhenomenonClass::Subordination: {
      if (conditions.size() != 2)
        throw std::invalid_argument(std::string(to_string(cls)) + " expects 2 conditions");
      // Second condition (the violating/garden-path one) carries the higher
      // expected target surprisal.
      return {pred(conditions[1], conditions[0])};
    }
  }
  throw std::invalid_argument("unknown phenomenon class");
}

namespace {

bool modifier_allowed(PhenomenonClass cls, ModifierType mod) {
  if (cls == PhenomenonClass::MissingObject) {
    return mod == ModifierType::None || mod == ModifierType::Src ||
           mod == ModifierType::CoordinatedSrc || mod == ModifierType::EmbeddedSrc;
  }
  return mod == ModifierType::None || mod == ModifierType::Adjective ||
         mod == ModifierType::Orc || mod == ModifierType::Src;
}

std::vector<std::string> prefix_before(const Condition& cond, const std::string& region) {
  std::vector<std::string> out;
  for (const Region& r : cond.regions) {
    if (r.name == region) return out;
    out.insert(out.end(), r.tokens.begin(), r.tokens.end());
  }
  return out;
}

}  // namespace

std::vector<std::string> validate_suite(const TestSuite& suite) {
  std::vector<std::string> v;
  auto add = [&](const std::string& msg) { v.push_back(suite.name + ": " + msg); };

  if (suite.items.empty()) add("suite has no items");
  if (!modifier_allowed(suite.phenomenon_class, suite.modifier_type))
    add(std::string("modifier type '") + to_string(suite.modifier_type) +
        "' is not defined for class '" + to_string(suite.phenomenon_class) + "'");
  if (suite.category != canonical_category(suite.phenomenon_class))
    add(std::string("category should be '") + to_string(canonical_category(suite.phenomenon_class)) +
        "' for class '" + to_string(suite.phenomenon_class) + "'");

  std::set<std::string> seen_ids;
  std::vector<std::string> schema;
  for (const TestItem& item : suite.items) {
    const std::string where = "item '" + item.id + "'";
    if (item.id.empty()) add("item with empty id");
    if (!seen_ids.insert(item.id).second) add("duplicate item id '" + item.id + "'");
    if (item.conditions.size() < 2) add(where + ": fewer than 2 conditions");
    std::vector<std::string> names;
    for (const Condition& c : item.conditions) {
      names.push_back(c.name);
      std::set<std::string> rnames;
      bool any_token = false;
      for (const Region& r : c.regions) {
        if (!rnames.insert(r.name).second)
          add(where + ": duplicate region '" + r.name + "' in condition '" + c.name + "'");
        for (const std::string& t : r.tokens) {
          if (t.empty()) add(where + ": empty token string in region '" + r.name + "'");
          any_token = true;
        }
      }
      if (!any_token) add(where + ": condition '" + c.name + "' has an empty sentence");
    }
    std::set<std::string> unique_names(names.begin(), names.end());
    if (unique_names.size() != names.size()) add(where + ": duplicate condition names");
    if (schema.empty()) {
      schema = names;
    } else if (names != schema) {
      add(where + ": condition-name schema differs from first item");
    }
    if (item.predictions.empty()) add(where + ": no predictions");
    for (std::size_t p = 0; p < item.predictions.size(); ++p) {
      const Prediction& pr = item.predictions[p];
      const std::string pwhere = where + " prediction " + std::to_string(p);
      const Condition* lc = item.find_condition(pr.left.condition);
      const Condition* rc = item.find_condition(pr.right.condition);
      if (!lc) add(pwhere + ": unknown condition '" + pr.left.condition + "'");
      if (!rc) add(pwhere + ": unknown condition '" + pr.right.condition + "'");
      if (!lc || !rc) continue;
      const Region* lr = lc->find_region(pr.left.region);
      const Region* rr = rc->find_region(pr.right.region);
      if (!lr) add(pwhere + ": unknown region '" + pr.left.region + "'");
      if (!rr) add(pwhere + ": unknown region '" + pr.right.region + "'");
      if (!lr || !rr) continue;
      // A comparison is controlled when the measured regions carry identical
      // content (minimal pair over the prefix), or when the two sides share a
      // byte-identical stimulus prefix (the classifier-noun cross
      // comparisons, which contrast two nouns under one prefix).
      const bool fixed_target = lr->tokens == rr->tokens;
      const bool fixed_prefix = prefix_before(*lc, pr.left.region) == prefix_before(*rc, pr.right.region);
      if (!fixed_target && !fixed_prefix)
        add(pwhere + ": neither target content nor stimulus prefix is fixed across conditions");
    }
  }
  return v;
}

namespace {

json region_to_json(const Region& r) {
  return json{{"name", r.name}, {"tokens", r.tokens}};
}

TestSuite suite_from_json(const json& j, const std::string& origin) {
  auto need = [&](const json& obj, const char* field) -> const json& {
    auto it = obj.find(field);
    if (it == obj.end())
      throw ValidationError(origin + ": missing field '" + field + "'");
    return *it;
  };
  TestSuite s;
  try {
    s.name = need(j, "name").get<std::string>();
    s.phenomenon_class = phenomenon_from_string(need(j, "phenomenon_class").get<std::string>());
    s.modifier_type = modifier_from_string(need(j, "modifier_type").get<std::string>());
    s.category = category_from_string(need(j, "category").get<std::string>());
    for (const json& ji : need(j, "items")) {
      TestItem item;
      item.id = need(ji, "id").get<std::string>();
      for (const json& jc : need(ji, "conditions")) {
        Condition c;
        c.name = need(jc, "name").get<std::string>();
        for (const json& jr : need(jc, "regions")) {
          Region r;
          r.name = need(jr, "name").get<std::string>();
          r.tokens = need(jr, "tokens").get<std::vector<std::string>>();
          c.regions.push_back(std::move(r));
        }
        item.conditions.push_back(std::move(c));
      }
      for (const json& jp : need(ji, "predictions")) {
        Prediction p;
        const json& left = need(jp, "left");
        const json& right = need(jp, "right");
        p.left = {need(left, "condition").get<std::string>(), need(left, "region").get<std::string>()};
        p.right = {need(right, "condition").get<std::string>(), need(right, "region").get<std::string>()};
        item.predictions.push_back(std::move(p));
      }
      s.items.push_back(std::move(item));
    }
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": malformed suite json: " + e.what());
  }
  return s;
}

}  // namespace

TestSuite parse_suite_json(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": invalid json: " + e.what());
  }
  TestSuite s = suite_from_json(j, origin);
  const std::vector<std::string> violations = validate_suite(s);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << origin << ": suite validation failed:";
    for (const std::string& x : violations) msg << "\n  " << x;
    throw ValidationError(msg.str());
  }
  return s;
}

std::string suite_to_json(const TestSuite& suite) {
  json j;
  j["name"] = suite.name;
  j["phenomenon_class"] = to_string(suite.phenomenon_class);
  j["modifier_type"] = to_string(suite.modifier_type);
  j["category"] = to_string(suite.category);
  j["items"] = json::array();
  for (const TestItem& item : suite.items) {
    json ji;
    ji["id"] = item.id;
    ji["conditions"] = json::array();
    for (const Condition& c : item.conditions) {
      json jc;
      jc["name"] = c.name;
      jc["regions"] = json::array();
      for (const Region& r : c.regions) jc["regions"].push_back(region_to_json(r));
      ji["conditions"].push_back(std::move(jc));
    }
    ji["predictions"] = json::array();
    for (const Prediction& p : item.predictions) {
      ji["predictions"].push_back(json{
          {"left", {{"condition", p.left.condition}, {"region", p.left.region}}},
          {"right", {{"condition", p.right.condition}, {"region", p.right.region}}}});
    }
    j["items"].push_back(std::move(ji));
  }
  return j.dump(2);
}

TestSuite load_suite(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open suite file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_suite_json(buf.str(), path);
}

void save_suite(const TestSuite& suite, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write suite file: " + path);
  out << suite_to_json(suite) << '\n';
}

std::vector<TestSuite> load_suite_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("suite directory does not exist: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<TestSuite> suites;
  suites.reserve(paths.size());
  for (const std::string& p : paths) suites.push_back(load_suite(p));
  return suites;
}

}  // namespace syneval
