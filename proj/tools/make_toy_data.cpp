// Writes a small self-consistent dataset for trying the sentprobe commands:
// STS pairs from three "sources", a validation STS file, NLI pairs, a
// definition dictionary, a sentence list and two probing tasks.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "synthetic.hpp"

namespace {

using namespace sentprobe;

std::ofstream create(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"make_toy_data: generate a synthetic corpus for sentprobe"};
  std::string out_dir;
  std::uint64_t seed = 1;
  std::size_t sts_pairs = 600, nli_pairs = 3000, probe_size = 400;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--seed", seed, "generator seed")->capture_default_str();
  app.add_option("--sts", sts_pairs, "STS pairs")->capture_default_str();
  app.add_option("--nli", nli_pairs, "NLI pairs")->capture_default_str();
  app.add_option("--probe", probe_size, "sentences per probing task")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    const synthetic::World world;
    Rng rng(seed);

    const auto sts = world.sts(sts_pairs, rng, {"news", "forum", "captions"});
    auto sts_out = create(dir / "sts.tsv");
    write_sts(sts_out, sts);
    auto dev_out = create(dir / "sts-dev.tsv");
    write_sts(dev_out, world.sts(sts_pairs / 3, rng, {"dev"}));

    auto nli_out = create(dir / "nli.tsv");
    for (const auto& e : world.nli(nli_pairs, rng)) {
      nli_out << to_string(e.label) << '\t' << e.premise << '\t' << e.hypothesis << '\n';
    }
    auto def_out = create(dir / "definitions.tsv");
    for (const auto& d : world.definitions(rng)) def_out << d.word << '\t' << d.definition << '\n';

    auto sent_out = create(dir / "sentences.txt");
    for (std::size_t i = 0; i < 50 && i < sts.size(); ++i) sent_out << sts[i].sentence1 << '\n';

    // topic: concepts come from one of four blocks of ten
    const std::size_t blocks = 4, per_block = world.config().concepts / blocks;
    auto topic_out = create(dir / "probe-topic.tsv");
    for (std::size_t i = 0; i < probe_size; ++i) {
      const std::size_t b = i % blocks;
      std::vector<std::size_t> pool;
      for (std::size_t c = b * per_block; c < (b + 1) * per_block; ++c) pool.push_back(c);
      rng.shuffle(pool);
      pool.resize(world.config().concepts_per_sentence);
      topic_out << "topic" << b << '\t' << world.sentence(pool, rng) << '\n';
    }
    // concept: does the sentence mention concept 0 in any of its surface forms
    auto concept_out = create(dir / "probe-concept.tsv");
    for (std::size_t i = 0; i < probe_size; ++i) {
      const bool yes = i % 2 == 0;
      auto concepts = world.sample_concepts(world.config().concepts_per_sentence, rng, {0});
      if (yes) concepts[0] = 0;
      concept_out << (yes ? "yes" : "no") << '\t' << world.sentence(concepts, rng) << '\n';
    }
    std::cout << "wrote toy data to " << out_dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "make_toy_data: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
