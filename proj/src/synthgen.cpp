#include "syneval/synthgen.hpp"

#include <filesystem>
#include <map>

#include "syneval/rng.hpp"

namespace syneval::synthgen {

namespace {

struct Lexicon {
  std::vector<std::string> person;  // person nouns, clfG only
  std::vector<std::string> noun_a;  // class A nouns, clfA
  std::vector<std::string> noun_b;  // class B nouns, clfB
  std::vector<std::string> verb_t;  // transitive, any object
  std::vector<std::string> verb_a;  // transitive, class-A objects
  std::vector<std::string> verb_b;  // transitive, class-B objects
  std::vector<std::string> verb_p;  // transitive, person objects
  std::vector<std::string> verb_i;  // intransitive
  std::vector<std::string> adj;

  Lexicon() {
    auto fill = [](std::vector<std::string>& out, const char* stem, int n) {
      for (int i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
    };
    fill(person, "person", 6);
    fill(noun_a, "nounA", 8);
    fill(noun_b, "nounB", 8);
    fill(verb_t, "verbT", 4);
    fill(verb_a, "verbA", 4);
    fill(verb_b, "verbB", 4);
    fill(verb_p, "verbP", 4);
    fill(verb_i, "verbI", 4);
    fill(adj, "adj", 6);
  }
};

using T = ParseTree;

T term(const std::string& tok) { return T::terminal(tok); }
T node(const std::string& label, std::vector<T> kids) {
  return T::internal(label, std::move(kids));
}

// Swaps class A and class B tokens; the mirror twin of a sentence.
std::string mirror_token(const std::string& tok) {
  if (tok.rfind("nounA", 0) == 0) return "nounB" + tok.substr(5);
  if (tok.rfind("nounB", 0) == 0) return "nounA" + tok.substr(5);
  if (tok.rfind("verbA", 0) == 0) return "verbB" + tok.substr(5);
  if (tok.rfind("verbB", 0) == 0) return "verbA" + tok.substr(5);
  if (tok == "clfA") return "clfB";
  if (tok == "clfB") return "clfA";
  return tok;
}

bool has_class_token(const T& t) {
  if (t.is_terminal()) return mirror_token(t.token) != t.token;
  for (const T& kid : t.children)
    if (has_class_token(kid)) return true;
  return false;
}

T mirror_tree(const T& t) {
  if (t.is_terminal()) return term(mirror_token(t.token));
  std::vector<T> kids;
  kids.reserve(t.children.size());
  for (const T& kid : t.children) kids.push_back(mirror_tree(kid));
  return node(t.label, std::move(kids));
}

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  // One weighted-random sentence tree (class-A or class-neutral form).
  T sentence() {
    const double r = rng_.next_double();
    if (r < 0.05) return intransitive();
    if (r < 0.20) return simple_object(/*specific=*/true);
    if (r < 0.28) return simple_object(/*specific=*/false);
    if (r < 0.34) return bare_person_object();
    if (r < 0.41) return bare_noun_object();
    if (r < 0.47) return adjective_object(rng_.next_double() < 0.06);
    if (r < 0.53) return src_short_object();
    if (r < 0.62) return src_long_object();
    if (r < 0.67) return vn_pattern(/*with_src=*/false);
    if (r < 0.72) return vn_pattern(/*with_src=*/true);
    if (r < 0.77) return mo_pattern(0);
    if (r < 0.81) return mo_pattern(1);
    if (r < 0.85) return mo_pattern(2);
    if (r < 0.89) return orc_object(/*general=*/false);
    if (r < 0.93) return orc_object(/*general=*/true);
    if (r < 0.96) return orc_subject(/*general=*/false);
    if (r < 0.99) return orc_subject(/*general=*/true);
    return demonstrative_main();
  }

  const std::string& pick(const std::vector<std::string>& xs) {
    return xs[rng_.next_below(xs.size())];
  }

 private:
  // (S (NP person) (VP verbI) (PU .))
  T intransitive() {
    return node("S", {node("NP", {term(pick(lex_.person))}),
                      node("VP", {term(pick(lex_.verb_i))}), punct()});
  }

  // (S (NP person) (VP verbT (NP det clf noun)) (PU .))
  T simple_object(bool specific) {
    std::string clf = specific ? "clfA" : "clfG";
    std::string obj;
    if (specific) {
      obj = pick(lex_.noun_a);
    } else {
      const double r = rng_.next_double();
      obj = r < 0.4 ? pick(lex_.noun_a) : (r < 0.8 ? pick(lex_.noun_b) : pick(lex_.person));
    }
    return node("S", {subject(), node("VP", {term(pick(lex_.verb_t)), np_det(clf, obj, {})}),
                      punct()});
  }

  T bare_person_object() {
    return node("S", {subject(),
                      node("VP", {term(pick(lex_.verb_p)), node("NP", {term(pick(lex_.person))})}),
                      punct()});
  }

  T bare_noun_object() {
    return node("S", {subject(),
                      node("VP", {term(pick(lex_.verb_a)), node("NP", {term(pick(lex_.noun_a))})}),
                      punct()});
  }

  // modifier (CP adj de) between classifier and noun; rare adjectives feed
  // the UNK machinery and stay in class-neutral sentences so they are not
  // duplicated by mirroring
  T adjective_object(bool rare) {
    const std::string a = rare ? rare_adj() : pick(lex_.adj);
    const std::string clf = rare ? "clfG" : "clfA";
    const std::string head = rare ? pick(lex_.person) : pick(lex_.noun_a);
    return node("S", {subject(),
                      node("VP", {term(pick(lex_.verb_t)),
                                  np_det(clf, head, {node("CP", {term(a), term("de")})})}),
                      punct()});
  }

  // (CP verbT (NP noun) de) modifier
  T src_short_object() {
    const std::string inner =
        rng_.next_double() < 0.5 ? pick(lex_.noun_a) : pick(lex_.noun_b);
    T cp = node("CP", {term(pick(lex_.verb_t)), node("NP", {term(inner)}), term("de")});
    return node("S", {subject(),
                      node("VP", {term(pick(lex_.verb_t)),
                                  np_det("clfA", pick(lex_.noun_a), {std::move(cp)})}),
                      punct()});
  }

  // (CP verbT (NP one clfG person) de): the class-neutral long modifier
  T src_long_object() {
    T cp = node("CP", {term(pick(lex_.verb_t)),
                       node("NP", {term("one"), term("clfG"), term(pick(lex_.person))}),
                       term("de")});
    return node("S", {subject(),
                      node("VP", {term(pick(lex_.verb_t)),
                                  np_det("clfA", pick(lex_.noun_a), {std::move(cp)})}),
                      punct()});
  }

  // class-selecting verb with the general classifier (verb-noun support)
  T vn_pattern(bool with_src) {
    std::vector<T> mods;
    if (with_src) {
      mods.push_back(node("CP", {term(pick(lex_.verb_t)),
                                 node("NP", {term("one"), term("clfG"), term(pick(lex_.person))}),
                                 term("de")}));
    }
    return node("S", {subject(),
                      node("VP", {term(pick(lex_.verb_a)),
                                  np_det("clfG", pick(lex_.noun_a), std::move(mods))}),
                      punct()});
  }

  // person-object verbs with SRC-modified person heads (missing-object
  // support); level 0 = single SRC, 1 = coordinated, 2 = embedded
  T mo_pattern(int level) {
    T cp = mo_modifier(level);
    return node("S", {subject(),
                      node("VP", {term(pick(lex_.verb_p)),
                                  node("NP", {std::move(cp), term(pick(lex_.person))})}),
                      punct()});
  }

  T mo_modifier(int level) {
    if (level == 0) {
      return node("CP", {term(pick(lex_.verb_a)), node("NP", {term(pick(lex_.noun_a))}),
                         term("de")});
    }
    if (level == 1) {
      return node("CP", {term(pick(lex_.verb_a)), node("NP", {term(pick(lex_.noun_a))}),
                         term("conj"), term(pick(lex_.verb_t)),
                         node("NP", {term(pick(lex_.noun_b))}), term("de")});
    }
    T inner = node("CP", {term(pick(lex_.verb_t)),
                          node("NP", {term("one"), term("clfG"), term(pick(lex_.noun_b))}),
                          term("de")});
    return node("CP", {term(pick(lex_.verb_a)),
                       node("NP", {std::move(inner), term(pick(lex_.noun_a))}), term("de")});
  }

  // (NP that clf (CP (NP person) verbT de) noun): object relative clause;
  // the specific classifier clashes with the adjacent person and cues it
  T orc_object(bool general) {
    T cp = node("CP", {node("NP", {term(pick(lex_.person))}), term(pick(lex_.verb_t)),
                       term("de")});
    return node("S", {subject(),
                      node("VP", {term(pick(lex_.verb_t)),
                                  node("NP", {term("that"), term(general ? "clfG" : "clfA"),
                                              std::move(cp), term(pick(lex_.noun_a))})}),
                      punct()});
  }

  // the same relative clause on a sentence subject
  T orc_subject(bool general) {
    T cp = node("CP", {node("NP", {term(pick(lex_.person))}), term(pick(lex_.verb_t)),
                       term("de")});
    T subj = node("NP", {term("that"), term(general ? "clfG" : "clfA"), std::move(cp),
                         term(pick(lex_.noun_a))});
    return node("S", {std::move(subj), node("VP", {term(pick(lex_.verb_i))}), punct()});
  }

  // "that clfG person verbT ..." keeps the main-verb reading of the
  // garden-path prefix in distribution
  T demonstrative_main() {
    return node("S", {node("NP", {term("that"), term("clfG"), term(pick(lex_.person))}),
                      node("VP", {term(pick(lex_.verb_t)), np_det("clfA", pick(lex_.noun_a), {})}),
                      punct()});
  }

  T subject() { return node("NP", {term(pick(lex_.person))}); }
  T punct() { return node("PU", {term("。")}); }

  T np_det(const std::string& clf, const std::string& head, std::vector<T> mods) {
    std::vector<T> kids;
    kids.push_back(term(rng_.next_double() < 0.5 ? "one" : "that"));
    kids.push_back(term(clf));
    for (T& m : mods) kids.push_back(std::move(m));
    kids.push_back(term(head));
    return node("NP", kids);
  }

  std::string rare_adj() { return "xq" + std::to_string(rare_counter_++) + "z"; }

  Lexicon lex_;
  Rng rng_;
  int rare_counter_ = 0;
};

std::vector<T> generate_split(Generator& gen, int count) {
  std::vector<T> out;
  while (static_cast<int>(out.size()) < count) {
    T t = gen.sentence();
    const bool mirrored = has_class_token(t);
    if (mirrored && static_cast<int>(out.size()) + 2 > count) continue;
    if (mirrored) out.push_back(mirror_tree(t));
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Planted suites
// ---------------------------------------------------------------------------

Region region(const std::string& name, std::vector<std::string> tokens) {
  return Region{name, std::move(tokens)};
}

TestSuite make_suite(const std::string& name, PhenomenonClass cls, ModifierType mod,
                     std::vector<TestItem> items) {
  TestSuite s;
  s.name = name;
  s.phenomenon_class = cls;
  s.modifier_type = mod;
  s.category = canonical_category(cls);
  s.items = std::move(items);
  return s;
}

struct SuiteBuilder {
  Lexicon lex;
  Rng rng;
  int items;

  SuiteBuilder(std::uint64_t seed, int n) : rng(seed), items(n) {}

  const std::string& pick(const std::vector<std::string>& xs) {
    return xs[rng.next_below(xs.size())];
  }

  // Grid: a = clfA+nounA, b = clfB+nounA, c = clfB+nounB, d = clfA+nounB.
  // The src modifier is class-neutral so short-window statistics are
  // identical across the grid.
  TestSuite classifier_noun(ModifierType mod) {
    std::vector<TestItem> out;
    for (int i = 0; i < items; ++i) {
      const std::size_t ni = rng.next_below(lex.noun_a.size());
      const std::string na = lex.noun_a[ni];
      const std::string nb = lex.noun_b[ni];
      const std::string subj = pick(lex.person);
      const std::string verb = pick(lex.verb_t);
      const std::string det = rng.next_double() < 0.5 ? "one" : "that";
      std::vector<std::string> modifier;
      if (mod == ModifierType::Src)
        modifier = {pick(lex.verb_t), "one", "clfG", pick(lex.person), "de"};
      TestItem item;
      item.id = "cn-" + std::string(to_string(mod)) + "-" + std::to_string(i);
      auto cond = [&](const char* cname, const std::string& clf, const std::string& nn) {
        Condition c;
        c.name = cname;
        c.regions.push_back(region("prefix", {subj, verb, det}));
        c.regions.push_back(region("classifier", {clf}));
        if (!modifier.empty()) c.regions.push_back(region("modifier", modifier));
        c.regions.push_back(region("target", {nn, "。"}));
        return c;
      };
      item.conditions = {cond("a", "clfA", na), cond("b", "clfB", na), cond("c", "clfB", nb),
                         cond("d", "clfA", nb)};
      item.predictions =
          standard_predictions(PhenomenonClass::ClassifierNoun, {"a", "b", "c", "d"});
      out.push_back(std::move(item));
    }
    return make_suite("planted-classifier-noun-" + std::string(to_string(mod)),
                      PhenomenonClass::ClassifierNoun, mod, std::move(out));
  }

  TestSuite verb_noun(ModifierType mod) {
    std::vector<TestItem> out;
    for (int i = 0; i < items; ++i) {
      const bool class_a = (i % 2) == 0;
      const std::size_t vi = rng.next_below(lex.verb_a.size());
      const std::string consistent = class_a ? lex.verb_a[vi] : lex.verb_b[vi];
      const std::string inconsistent = class_a ? lex.verb_b[vi] : lex.verb_a[vi];
      const std::string noun = class_a ? pick(lex.noun_a) : pick(lex.noun_b);
      const std::string subj = pick(lex.person);
      std::vector<std::string> modifier;
      if (mod == ModifierType::Src)
        modifier = {pick(lex.verb_t), "one", "clfG", pick(lex.person), "de"};
      TestItem item;
      item.id = "vn-" + std::string(to_string(mod)) + "-" + std::to_string(i);
      auto cond = [&](const char* cname, const std::string& verb) {
        Condition c;
        c.name = cname;
        c.regions.push_back(region("subject", {subj}));
        c.regions.push_back(region("verb", {verb}));
        c.regions.push_back(region("mid", {"one", "clfG"}));
        if (!modifier.empty()) c.regions.push_back(region("modifier", modifier));
        c.regions.push_back(region("target", {noun, "。"}));
        return c;
      };
      item.conditions = {cond("consistent", consistent), cond("inconsistent", inconsistent)};
      item.predictions =
          standard_predictions(PhenomenonClass::VerbNoun, {"consistent", "inconsistent"});
      out.push_back(std::move(item));
    }
    return make_suite("planted-verb-noun-" + std::string(to_string(mod)),
                      PhenomenonClass::VerbNoun, mod, std::move(out));
  }

  TestSuite missing_object(ModifierType mod) {
    std::vector<TestItem> out;
    for (int i = 0; i < items; ++i) {
      const std::string subj = pick(lex.person);
      const std::string verb = pick(lex.verb_p);
      const std::string obj = pick(lex.person);
      std::vector<std::string> with, without;
      if (mod == ModifierType::Src) {
        const std::string v = pick(lex.verb_a), n = pick(lex.noun_a);
        with = {v, n, "de"};
        without = {v, n};
      } else if (mod == ModifierType::CoordinatedSrc) {
        const std::string v1 = pick(lex.verb_a), n1 = pick(lex.noun_a);
        const std::string v2 = pick(lex.verb_t), n2 = pick(lex.noun_b);
        with = {v1, n1, "conj", v2, n2, "de"};
        without = {v1, n1, "conj", v2, n2};
      } else if (mod == ModifierType::EmbeddedSrc) {
        const std::string v1 = pick(lex.verb_a), n1 = pick(lex.noun_a);
        const std::string v2 = pick(lex.verb_t), n2 = pick(lex.noun_b);
        with = {v1, v2, "one", "clfG", n2, "de", n1, "de"};
        without = {v1, v2, "one", "clfG", n2, "de", n1};
      }
      TestItem item;
      item.id = "mo-" + std::string(to_string(mod)) + "-" + std::to_string(i);
      auto cond = [&](const char* cname, const std::vector<std::string>& modifier,
                      bool with_object) {
        Condition c;
        c.name = cname;
        c.regions.push_back(region("prefix", {subj, verb}));
        if (mod != ModifierType::None) c.regions.push_back(region("modifier", modifier));
        c.regions.push_back(region("object", with_object ? std::vector<std::string>{obj}
                                                         : std::vector<std::string>{}));
        c.regions.push_back(region("target", {"。"}));
        return c;
      };
      item.conditions = {cond("with-object", with, true), cond("without-object", without, false)};
      item.predictions = standard_predictions(PhenomenonClass::MissingObject,
                                              {"with-object", "without-object"});
      out.push_back(std::move(item));
    }
    return make_suite("planted-missing-object-" + std::string(to_string(mod)),
                      PhenomenonClass::MissingObject, mod, std::move(out));
  }

  // "matched": the specific classifier clashes with the adjacent person and
  // cues the upcoming relative clause; "mismatched": the general classifier
  // admits the garden-path reading, so the disambiguator surprises more.
  TestSuite garden_path(bool object_variant) {
    std::vector<TestItem> out;
    for (int i = 0; i < items; ++i) {
      const std::string subj = pick(lex.person);
      const std::string main_verb = pick(lex.verb_t);
      const std::string rc_subj = pick(lex.person);
      const std::string rc_verb = pick(lex.verb_t);
      const std::string head = pick(lex.noun_a);
      const std::string vi_verb = pick(lex.verb_i);
      TestItem item;
      item.id = std::string(object_variant ? "gpo" : "gps") + "-" + std::to_string(i);
      auto cond = [&](const char* cname, const std::string& clf) {
        Condition c;
        c.name = cname;
        if (object_variant) {
          c.regions.push_back(region("prefix", {subj, main_verb, "that"}));
          c.regions.push_back(region("classifier", {clf}));
          c.regions.push_back(region("noun", {rc_subj}));
          c.regions.push_back(region("target", {rc_verb}));
          c.regions.push_back(region("continuation", {"de", head, "。"}));
        } else {
          c.regions.push_back(region("prefix", {"that"}));
          c.regions.push_back(region("classifier", {clf}));
          c.regions.push_back(region("np", {rc_subj, rc_verb}));
          c.regions.push_back(region("target", {"de"}));
          c.regions.push_back(region("continuation", {head, vi_verb, "。"}));
        }
        return c;
      };
      item.conditions = {cond("matched", "clfA"), cond("mismatched", "clfG")};
      item.predictions = standard_predictions(object_variant ? PhenomenonClass::GardenPathObject
                                                             : PhenomenonClass::GardenPathSubject,
                                              {"matched", "mismatched"});
      out.push_back(std::move(item));
    }
    return make_suite(object_variant ? "planted-garden-path-object-none"
                                     : "planted-garden-path-subject-none",
                      object_variant ? PhenomenonClass::GardenPathObject
                                     : PhenomenonClass::GardenPathSubject,
                      ModifierType::None, std::move(out));
  }
};

}  // namespace

SynthOutput generate(const SynthConfig& config) {
  SynthOutput out;
  Generator train_gen(config.seed);
  out.train = generate_split(train_gen, config.sentences);
  Generator dev_gen(config.seed ^ 0xdeadbeef12345678ULL);
  out.dev = generate_split(dev_gen, config.dev_sentences);

  SuiteBuilder b(config.seed ^ 0x5eedf00d, config.items_per_suite);
  out.planted.push_back(b.classifier_noun(ModifierType::None));
  out.planted.push_back(b.classifier_noun(ModifierType::Src));
  out.planted.push_back(b.verb_noun(ModifierType::None));
  out.planted.push_back(b.verb_noun(ModifierType::Src));
  out.planted.push_back(b.missing_object(ModifierType::None));
  out.planted.push_back(b.missing_object(ModifierType::Src));
  out.planted.push_back(b.missing_object(ModifierType::CoordinatedSrc));
  out.planted.push_back(b.missing_object(ModifierType::EmbeddedSrc));
  out.extra.push_back(b.garden_path(true));
  out.extra.push_back(b.garden_path(false));

  for (const std::vector<TestSuite>* group : {&out.planted, &out.extra}) {
    for (const TestSuite& s : *group) {
      const auto violations = validate_suite(s);
      if (!violations.empty())
        throw ValidationError("generated suite invalid: " + violations.front());
    }
  }
  return out;
}

void write_synth(const SynthOutput& output, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  fs::create_directories(dir + "/suites/planted");
  fs::create_directories(dir + "/suites/extra");
  write_treebank_file(dir + "/train.trees", output.train);
  write_treebank_file(dir + "/dev.trees", output.dev);
  for (const TestSuite& s : output.planted)
    save_suite(s, dir + "/suites/planted/" + s.name + ".json");
  for (const TestSuite& s : output.extra)
    save_suite(s, dir + "/suites/extra/" + s.name + ".json");
}

}  // namespace syneval::synthgen
