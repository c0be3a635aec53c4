#pragma once

// Embedding stores with known structure for exercising the probe harness.

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sentprobe/encoder.hpp"
#include "sentprobe/evalsuite.hpp"

namespace sentprobe::fixtures {

struct StoreTask {
  std::shared_ptr<EmbeddingStore> store;
  ProbeTask task;
};

// Class = sign of coordinate 0, kept at least `margin` away from zero; the
// remaining coordinates are noise.
inline StoreTask separable(std::size_t n, std::size_t dim, std::uint64_t seed, double margin = 0.5) {
  Rng rng(seed);
  StoreTask out{std::make_shared<EmbeddingStore>(dim), {"separable", {}, {}, {"neg", "pos"}}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.uniform(-1, 1);
    v[0] = (label ? 1.0 : -1.0) * rng.uniform(margin, margin + 1.0);
    const std::string key = "separable example " + std::to_string(i);
    out.store->insert(key, RealVector(v));
    out.task.sentences.push_back(key);
    out.task.labels.push_back(label);
  }
  return out;
}

// Balanced binary labels drawn independently of the embeddings.
inline StoreTask shuffled_labels(std::size_t n, std::size_t dim, std::uint64_t seed) {
  auto out = separable(n, dim, seed);
  Rng rng(seed + 7);
  rng.shuffle(out.task.labels);
  out.task.name = "shuffled";
  return out;
}

// Two providers over the same sentences: A sees f1 only, B sees f2 only, and
// the label is [f1 + f2 > 0] with |f1 + f2| >= margin.
struct TwoFeatureSetup {
  std::shared_ptr<EmbeddingStore> a;
  std::shared_ptr<EmbeddingStore> b;
  ProbeTask task;
};

inline TwoFeatureSetup two_features(std::size_t n, std::uint64_t seed, double margin = 0.3) {
  Rng rng(seed);
  TwoFeatureSetup out{std::make_shared<EmbeddingStore>(2), std::make_shared<EmbeddingStore>(2),
                      {"f1+f2", {}, {}, {"neg", "pos"}}};
  std::size_t i = 0;
  while (out.task.sentences.size() < n) {
    const double f1 = rng.uniform(-1, 1), f2 = rng.uniform(-1, 1);
    if (std::abs(f1 + f2) < margin) continue;
    const std::string key = "pair feature example " + std::to_string(i++);
    out.a->insert(key, RealVector{f1, rng.uniform(-1, 1)});
    out.b->insert(key, RealVector{f2, rng.uniform(-1, 1)});
    out.task.sentences.push_back(key);
    out.task.labels.push_back(f1 + f2 > 0 ? 1 : 0);
  }
  return out;
}

}  // namespace sentprobe::fixtures
