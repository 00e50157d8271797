#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "syneval/suite.hpp"
#include "syneval/treebank.hpp"

namespace syneval::synthgen {

// Synthetic Mandarin-like corpus with planted classifier-noun compatibility,
// verb-object selection, and verb-transitivity rules:
//   - clfA pairs only with class-A nouns, clfB with class-B, clfG with
//     anything including person nouns;
//   - verbA takes class-A objects, verbB class-B, verbT anything, verbP
//     persons; intransitives never take an object;
//   - "de" is always followed by a head noun.
// Class A and class B sentences are emitted as exact mirror twins, so
// count-based models see identical statistics for paired nouns and the
// planted suites whose cue lies beyond a short context window produce exact
// ties for them.
struct SynthConfig {
  int sentences = 2000;      // training treebank size
  int dev_sentences = 200;
  std::uint64_t seed = 2024;
  int items_per_suite = 14;
};

struct SynthOutput {
  std::vector<ParseTree> train;
  std::vector<ParseTree> dev;
  std::vector<TestSuite> planted;  // accuracy-bearing planted suites
  std::vector<TestSuite> extra;    // garden-path demonstration suites
};

SynthOutput generate(const SynthConfig& config);

// Writes train.trees, dev.trees, suites/planted/*.json, suites/extra/*.json.
void write_synth(const SynthOutput& output, const std::string& dir);

}  // namespace syneval::synthgen
