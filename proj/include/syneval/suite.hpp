#pragma once

#include <string>
#include <vector>

#include "syneval/errors.hpp"

namespace syneval {

enum class PhenomenonClass {
  ClassifierNoun,
  GardenPathObject,
  GardenPathSubject,
  VerbNoun,
  MissingObject,
  Subordination,
};

enum class ModifierType { None, Adjective, Orc, Src, CoordinatedSrc, EmbeddedSrc };

enum class SuiteCategory { Syntactic, Semantic, Hybrid };

const char* to_string(PhenomenonClass c);
const char* to_string(ModifierType m);
const char* to_string(SuiteCategory c);
PhenomenonClass phenomenon_from_string(const std::string& s);
ModifierType modifier_from_string(const std::string& s);
SuiteCategory category_from_string(const std::string& s);

// The category a phenomenon class belongs to in the syntactic/semantic
// grouping; garden-path classes are hybrid and excluded from that analysis.
SuiteCategory canonical_category(PhenomenonClass c);

struct Region {
  std::string name;
  std::vector<std::string> tokens;  // may be empty for absent content
};

struct Condition {
  std::string name;
  std::vector<Region> regions;  // concatenation forms the full sentence

  std::vector<std::string> sentence_tokens() const;
  const Region* find_region(const std::string& name) const;
};

struct RegionRef {
  std::string condition;
  std::string region;
};

// Success means summed surprisal of `left` strictly exceeds `right`.
struct Prediction {
  RegionRef left;
  RegionRef right;
};

struct TestItem {
  std::string id;
  std::vector<Condition> conditions;
  std::vector<Prediction> predictions;

  const Condition* find_condition(const std::string& name) const;
};

struct TestSuite {
  std::string name;
  PhenomenonClass phenomenon_class = PhenomenonClass::ClassifierNoun;
  ModifierType modifier_type = ModifierType::None;
  SuiteCategory category = SuiteCategory::Semantic;
  std::vector<TestItem> items;
};

// Builds the per-class comparison set over `conditions` (given in schema
// order) against the region named `target_region`:
//   classifier-noun [a,b,c,d] -> b>a, d>c, d>a, b>c
//   garden-path [matched, mismatched] -> mismatched > matched
//   verb-noun / missing-object / subordination -> second condition > first
std::vector<Prediction> standard_predictions(PhenomenonClass cls,
                                             const std::vector<std::string>& conditions,
                                             const std::string& target_region = "target");

// Invariant checks; violations returned as data, empty means valid.
std::vector<std::string> validate_suite(const TestSuite& suite);

// Loads and validates; throws ValidationError naming the first violation.
TestSuite load_suite(const std::string& path);
void save_suite(const TestSuite& suite, const std::string& path);
TestSuite parse_suite_json(const std::string& json_text, const std::string& origin = "<string>");
std::string suite_to_json(const TestSuite& suite);

// All *.json files in a directory, sorted by filename.
std::vector<TestSuite> load_suite_dir(const std::string& dir);

}  // namespace syneval
