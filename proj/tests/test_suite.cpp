#include "syneval/suite.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"

using namespace syneval;

namespace {
const std::string kSuiteDir = std::string(SYNEVAL_FIXTURE_DIR) + "/suites";
}

TEST_CASE("classifier-noun fixture loads with 4 conditions and 4 predictions") {
  const TestSuite s = load_suite(kSuiteDir + "/classifier-noun-adjective.json");
  CHECK(s.phenomenon_class == PhenomenonClass::ClassifierNoun);
  CHECK(s.modifier_type == ModifierType::Adjective);
  REQUIRE(s.items.size() == 1);
  CHECK(s.items[0].conditions.size() == 4);
  CHECK(s.items[0].predictions.size() == 4);
}

TEST_CASE("all shipped fixture suites pass validation") {
  const std::vector<TestSuite> suites = load_suite_dir(kSuiteDir);
  CHECK(suites.size() == 24);
  for (const TestSuite& s : suites) {
    CHECK(validate_suite(s).empty());
  }
}

TEST_CASE("standard predictions per phenomenon class") {
  SUBCASE("classifier-noun emits the four grid comparisons") {
    const auto preds = standard_predictions(PhenomenonClass::ClassifierNoun, {"a", "b", "c", "d"});
    REQUIRE(preds.size() == 4);
    CHECK(preds[0].left.condition == "b");
    CHECK(preds[0].right.condition == "a");
    CHECK(preds[1].left.condition == "d");
    CHECK(preds[1].right.condition == "c");
    CHECK(preds[2].left.condition == "d");
    CHECK(preds[2].right.condition == "a");
    CHECK(preds[3].left.condition == "b");
    CHECK(preds[3].right.condition == "c");
    for (const auto& p : preds) CHECK(p.left.region == "target");
  }
  SUBCASE("subordination: the clause without a main clause is harder at the period") {
    const auto preds =
        standard_predictions(PhenomenonClass::Subordination, {"with-main", "without-main"});
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].left.condition == "without-main");
    CHECK(preds[0].right.condition == "with-main");
  }
  SUBCASE("missing object: ending without the object is harder at the period") {
    const auto preds =
        standard_predictions(PhenomenonClass::MissingObject, {"with-object", "without-object"});
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].left.condition == "without-object");
  }
  SUBCASE("garden path: the garden-path condition carries the higher target surprisal") {
    const auto preds =
        standard_predictions(PhenomenonClass::GardenPathObject, {"matched", "mismatched"});
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].left.condition == "mismatched");
    CHECK(preds[0].right.condition == "matched");
  }
  SUBCASE("wrong arity is rejected") {
    CHECK_THROWS_AS(standard_predictions(PhenomenonClass::ClassifierNoun, {"a", "b"}),
                    std::invalid_argument);
    CHECK_THROWS_AS(standard_predictions(PhenomenonClass::VerbNoun, {"a", "b", "c"}),
                    std::invalid_argument);
  }
}

TEST_CASE("fixture predictions match standard_predictions") {
  const std::vector<TestSuite> suites = load_suite_dir(kSuiteDir);
  for (const TestSuite& s : suites) {
    for (const TestItem& item : s.items) {
      std::vector<std::string> names;
      for (const Condition& c : item.conditions) names.push_back(c.name);
      const auto expect = standard_predictions(s.phenomenon_class, names);
      REQUIRE(item.predictions.size() == expect.size());
      for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(item.predictions[i].left.condition == expect[i].left.condition);
        CHECK(item.predictions[i].right.condition == expect[i].right.condition);
        CHECK(item.predictions[i].left.region == expect[i].left.region);
      }
    }
  }
}

namespace {

TestSuite tiny_suite() {
  TestSuite s;
  s.name = "tiny";
  s.phenomenon_class = PhenomenonClass::MissingObject;
  s.modifier_type = ModifierType::None;
  s.category = SuiteCategory::Syntactic;
  TestItem item;
  item.id = "i1";
  Condition with;
  with.name = "with-object";
  with.regions = {{"prefix", {"v"}}, {"object", {"n"}}, {"target", {"。"}}};
  Condition without;
  without.name = "without-object";
  without.regions = {{"prefix", {"v"}}, {"object", {}}, {"target", {"。"}}};
  item.conditions = {with, without};
  item.predictions = standard_predictions(PhenomenonClass::MissingObject,
                                          {"with-object", "without-object"});
  s.items = {item};
  return s;
}

}  // namespace

TEST_CASE("validate_suite flags violations as data") {
  SUBCASE("well-formed suite has no violations") {
    CHECK(validate_suite(tiny_suite()).empty());
  }
  SUBCASE("empty items") {
    TestSuite s = tiny_suite();
    s.items.clear();
    CHECK(!validate_suite(s).empty());
  }
  SUBCASE("duplicate item id") {
    TestSuite s = tiny_suite();
    s.items.push_back(s.items[0]);
    const auto v = validate_suite(s);
    REQUIRE(!v.empty());
    bool mentions_id = false;
    for (const auto& msg : v)
      if (msg.find("i1") != std::string::npos) mentions_id = true;
    CHECK(mentions_id);
  }
  SUBCASE("prediction referencing unknown region") {
    TestSuite s = tiny_suite();
    s.items[0].predictions[0].left.region = "nope";
    CHECK(validate_suite(s).size() == 1);
  }
  SUBCASE("prediction referencing unknown condition") {
    TestSuite s = tiny_suite();
    s.items[0].predictions[0].left.condition = "nope";
    CHECK(!validate_suite(s).empty());
  }
  SUBCASE("target differing across compared conditions with differing prefixes") {
    TestSuite s = tiny_suite();
    s.items[0].conditions[1].regions[2].tokens = {"？"};
    CHECK(!validate_suite(s).empty());
  }
  SUBCASE("modifier not defined for the class") {
    TestSuite s = tiny_suite();
    s.modifier_type = ModifierType::Adjective;  // missing-object has the SRC ladder
    CHECK(!validate_suite(s).empty());
  }
  SUBCASE("condition schema must match across items") {
    TestSuite s = tiny_suite();
    TestItem second = s.items[0];
    second.id = "i2";
    second.conditions[0].name = "zzz";
    second.predictions[0].left.condition = "without-object";
    second.predictions[0].right.condition = "zzz";
    s.items.push_back(second);
    CHECK(!validate_suite(s).empty());
  }
}

TEST_CASE("load_suite raises a descriptive error for invalid files") {
  const std::string path = "bad_suite.json";
  {
    TestSuite s = tiny_suite();
    s.items[0].predictions[0].left.region = "nope";
    std::ofstream out(path);
    out << suite_to_json(s);
  }
  CHECK_THROWS_AS(load_suite(path), ValidationError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_suite("does_not_exist.json"), IoError);
}

TEST_CASE("suite json round-trip") {
  const TestSuite s = tiny_suite();
  const TestSuite back = parse_suite_json(suite_to_json(s));
  CHECK(back.name == s.name);
  REQUIRE(back.items.size() == 1);
  CHECK(back.items[0].conditions[1].regions[1].tokens.empty());
  CHECK(back.items[0].predictions[0].left.condition == "without-object");
}
