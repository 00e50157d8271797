// Generates the synthetic planted-rule treebank and its test suites. The
// corpus plants classifier-noun compatibility, verb-object selection, and
// strict transitivity, so trained models can be probed for exactly those
// regularities.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "syneval/synthgen.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic planted-rule treebank generator"};
  syneval::synthgen::SynthConfig config;
  std::string out = "synth";
  app.add_option("--out", out, "output directory");
  app.add_option("--sentences", config.sentences, "training sentences");
  app.add_option("--dev-sentences", config.dev_sentences, "development sentences");
  app.add_option("--seed", config.seed, "generator seed");
  app.add_option("--items", config.items_per_suite, "items per generated suite");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto output = syneval::synthgen::generate(config);
    syneval::synthgen::write_synth(output, out);
    std::cout << "wrote " << output.train.size() << " training trees, " << output.dev.size()
              << " dev trees, " << output.planted.size() + output.extra.size() << " suites to "
              << out << "\n";
  } catch (const std::exception& e) {
    std::cerr << "syneval-synthgen: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
