#pragma once

// Unsupervised STS scoring (plain and partitioned), the frozen-feature
// logistic-regression probe with k-fold cross-validation, and seed
// aggregation of both kinds of report.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sentprobe/corpus.hpp"
#include "sentprobe/encoder.hpp"
#include "sentprobe/error.hpp"
#include "sentprobe/numstat.hpp"
#include "sentprobe/objectives.hpp"

namespace sentprobe {

// ---------------------------------------------------------------------------
// STS

struct StsScore {
  double spearman = 0.0;
  double pearson = 0.0;
  std::size_t n = 0;
};

// Cosine similarity of each pair, one entry per pair.
inline std::vector<double> pair_cosines(const EmbeddingProvider& provider,
                                        const std::vector<StsPair>& pairs) {
  std::vector<double> sims;
  sims.reserve(pairs.size());
  for (const auto& p : pairs) {
    sims.push_back(cosine(provider.embed(p.sentence1), provider.embed(p.sentence2)));
  }
  return sims;
}

// Correlation between per-pair cosine similarity and gold scores.
inline StsScore eval_sts(const EmbeddingProvider& provider, const std::vector<StsPair>& pairs) {
  if (pairs.size() < 2) throw InvalidInput("eval_sts: need at least two pairs");
  const auto sims = pair_cosines(provider, pairs);
  std::vector<double> gold;
  gold.reserve(pairs.size());
  for (const auto& p : pairs) gold.push_back(p.gold);
  return {spearman(sims, gold), pearson(sims, gold), pairs.size()};
}

// One report row. Scores are x100; per-seed values are kept so spreads can
// be recomputed after aggregation. A non-empty `error` flags the row.
struct StsRow {
  std::string label;
  std::size_t n = 0;
  double spearman = 0.0;
  double pearson = 0.0;
  std::vector<double> spearman_per_seed;
  std::vector<double> pearson_per_seed;
  std::string error;

  bool valid() const noexcept { return error.empty(); }
};

inline constexpr std::string_view kAllLabel = "ALL";

struct StsReport {
  std::string provider;
  std::vector<std::uint64_t> seeds;
  std::vector<StsRow> subsets;
  StsRow all;
  std::size_t runs = 1;  // reports averaged into this one
};

namespace detail {

inline StsRow score_row(const EmbeddingProvider& provider, std::string label,
                        const std::vector<StsPair>& pairs) {
  StsRow row{std::move(label), pairs.size(), 0.0, 0.0, {}, {}, {}};
  if (pairs.size() < 2) {
    row.error = "too few pairs (" + std::to_string(pairs.size()) + ")";
    return row;
  }
  try {
    const auto s = eval_sts(provider, pairs);
    row.spearman = 100.0 * s.spearman;
    row.pearson = 100.0 * s.pearson;
    row.spearman_per_seed = {row.spearman};
    row.pearson_per_seed = {row.pearson};
  } catch (const ZeroVariance& e) {
    row.error = std::string("zero variance: ") + e.what();
  }
  return row;
}

}  // namespace detail

// Scores every subset and, separately, the pooled concatenation of all of
// them. The pooled score is not an average of subset scores.
inline StsReport eval_sts_partitioned(const EmbeddingProvider& provider, const Partition& partition,
                                      std::string provider_name = {}) {
  StsReport report{std::move(provider_name), {}, {}, {}, 1};
  for (const auto& subset : partition.subsets) {
    report.subsets.push_back(detail::score_row(provider, subset.label, subset.pairs));
  }
  report.all = detail::score_row(provider, std::string(kAllLabel), concat_subsets(partition));
  return report;
}

// ---------------------------------------------------------------------------
// Cross-validation

inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, Rng& rng) {
  if (k < 2) throw InvalidInput("kfold_split: k must be >= 2");
  if (n < k) {
    throw InvalidInput("kfold_split: " + std::to_string(n) + " examples cannot fill " +
                       std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> folds;
  std::size_t cursor = 0;
  for (std::size_t size : balanced_sizes(n, k)) {
    folds.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                       order.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Logistic regression on frozen features

struct ProbeConfig {
  std::size_t folds = 10;
  std::size_t batch_size = 64;
  std::size_t epochs = 4;
  AdamConfig adam;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (folds < 2) throw InvalidInput("ProbeConfig: folds must be >= 2");
    if (batch_size == 0) throw InvalidInput("ProbeConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw InvalidInput("ProbeConfig: learning_rate must be > 0");
  }
};

struct LogRegModel {
  RealMatrix weights;  // classes x feature dim
  RealVector bias;     // classes

  std::size_t classes() const noexcept { return weights.rows(); }
  std::size_t feature_dim() const noexcept { return weights.cols(); }

  RealVector logits(std::span<const double> x) const {
    if (x.size() != feature_dim()) throw InvalidInput("LogRegModel: feature dimension mismatch");
    std::vector<double> z(classes());
    for (std::size_t c = 0; c < classes(); ++c) z[c] = dot(weights.row(c), x) + bias[c];
    return RealVector(std::move(z));
  }

  std::size_t predict(std::span<const double> x) const {
    const auto z = logits(x);
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  }
};

struct LogRegGradients {
  double loss = 0.0;
  RealMatrix weights;
  std::vector<double> bias;
};

// Mean softmax cross-entropy over `batch` (indices into features/labels).
inline LogRegGradients logreg_loss_and_grads(const LogRegModel& model,
                                             const std::vector<RealVector>& features,
                                             const std::vector<std::size_t>& labels,
                                             std::span<const std::size_t> batch) {
  if (batch.empty()) throw InvalidInput("logreg_loss_and_grads: empty batch");
  LogRegGradients g{0.0, RealMatrix(model.classes(), model.feature_dim()),
                    std::vector<double>(model.classes(), 0.0)};
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (auto i : batch) {
    const auto& x = features[i];
    const auto probs = softmax(model.logits(x));
    g.loss += cross_entropy(probs, labels[i]) * scale;
    for (std::size_t c = 0; c < model.classes(); ++c) {
      const double dz = (probs[c] - (c == labels[i] ? 1.0 : 0.0)) * scale;
      g.bias[c] += dz;
      auto gw = g.weights.row(c);
      for (std::size_t j = 0; j < x.dim(); ++j) gw[j] += dz * x[j];
    }
  }
  return g;
}

// Zero-initialized weights; minibatch Adam for epochs x ceil(n/batch) steps,
// reshuffling each epoch. `num_classes` = 0 infers max(label) + 1.
inline LogRegModel train_logreg(const std::vector<RealVector>& features,
                                const std::vector<std::size_t>& labels, const ProbeConfig& cfg,
                                std::size_t num_classes = 0) {
  cfg.validate();
  if (features.empty()) throw InvalidInput("train_logreg: no examples");
  if (features.size() != labels.size()) throw InvalidInput("train_logreg: features/labels size mismatch");
  const std::size_t dim = features.front().dim();
  for (const auto& f : features) {
    if (f.dim() != dim) throw InvalidInput("train_logreg: inconsistent feature dimensions");
  }
  const std::set<std::size_t> present(labels.begin(), labels.end());
  if (present.size() < 2) throw InvalidInput("train_logreg: need at least two classes");
  if (num_classes == 0) num_classes = *present.rbegin() + 1;
  if (*present.rbegin() >= num_classes) throw InvalidInput("train_logreg: label out of range");

  LogRegModel model{RealMatrix(num_classes, dim), RealVector::zeros(num_classes)};
  AdamState w_state, b_state;
  Rng rng(cfg.seed);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : shuffled_batches(features.size(), cfg.batch_size, rng)) {
      const auto g = logreg_loss_and_grads(model, features, labels, batch);
      adam_step(model.weights.flat(), g.weights.flat(), w_state, cfg.learning_rate, cfg.adam);
      adam_step(model.bias.span(), g.bias, b_state, cfg.learning_rate, cfg.adam);
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Probe tasks

struct ProbeTask {
  std::string name;
  std::vector<std::string> sentences;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;  // index -> label text

  std::size_t classes() const noexcept { return class_names.size(); }

  void validate(std::size_t folds) const {
    if (sentences.size() != labels.size()) throw InvalidInput("ProbeTask: sentences/labels mismatch");
    if (class_names.size() < 2) throw InvalidInput("ProbeTask " + name + ": needs >= 2 classes");
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (auto l : labels) {
      if (l >= counts.size()) throw InvalidInput("ProbeTask " + name + ": label out of range");
      ++counts[l];
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] < folds) {
        throw InvalidInput("ProbeTask " + name + ": class \"" + class_names[c] + "\" has " +
                           std::to_string(counts[c]) + " examples, fewer than " +
                           std::to_string(folds) + " folds");
      }
    }
  }
};

// "label<TAB>sentence" lines; class ids follow the sorted label strings.
inline ProbeTask read_probe_task(std::istream& in, std::string name,
                                 const std::string& source = "<probe>") {
  std::vector<std::pair<std::string, std::string>> rows;
  detail::for_each_record(in, source, [&](const auto& cols, std::size_t lineno, const auto& src) {
    detail::require_columns(cols, 2, lineno, src);
    rows.emplace_back(detail::nonempty_field(cols[0], "label", lineno, src),
                      detail::nonempty_field(cols[1], "sentence", lineno, src));
  });
  ProbeTask task{std::move(name), {}, {}, {}};
  std::map<std::string, std::size_t> ids;
  for (const auto& r : rows) ids.emplace(r.first, 0);
  for (auto& [label, id] : ids) {
    id = task.class_names.size();
    task.class_names.push_back(label);
  }
  for (auto& r : rows) {
    task.labels.push_back(ids.at(r.first));
    task.sentences.push_back(std::move(r.second));
  }
  return task;
}

inline ProbeTask load_probe_task(const std::string& path, std::string name) {
  auto in = detail::open_input(path);
  return read_probe_task(in, std::move(name), path);
}

struct ProbeResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> predictions;  // per example, from the fold that held it out
  std::vector<std::size_t> fold_of;      // per example
};

// k-fold CV on frozen embeddings: each fold is predicted by a classifier
// trained on the remaining folds; accuracy = total correct / n.
inline ProbeResult eval_probe(const EmbeddingProvider& provider, const ProbeTask& task,
                              const ProbeConfig& cfg) {
  cfg.validate();
  task.validate(cfg.folds);
  std::vector<RealVector> features;
  features.reserve(task.sentences.size());
  for (const auto& s : task.sentences) features.push_back(provider.embed(s));

  const std::size_t n = features.size();
  Rng split_rng(cfg.seed);
  const auto folds = kfold_split(n, cfg.folds, split_rng);
  ProbeResult result{0.0, 0, std::vector<std::size_t>(n), std::vector<std::size_t>(n)};
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<bool> held_out(n, false);
    for (auto i : folds[f]) held_out[i] = true;
    std::vector<RealVector> train_x;
    std::vector<std::size_t> train_y;
    for (std::size_t i = 0; i < n; ++i) {
      if (held_out[i]) continue;
      train_x.push_back(features[i]);
      train_y.push_back(task.labels[i]);
    }
    ProbeConfig fold_cfg = cfg;
    fold_cfg.seed = cfg.seed + 1 + f;
    const auto model = train_logreg(train_x, train_y, fold_cfg, task.classes());
    for (auto i : folds[f]) {
      result.predictions[i] = model.predict(features[i]);
      result.fold_of[i] = f;
      result.correct += result.predictions[i] == task.labels[i];
    }
  }
  result.accuracy = static_cast<double>(result.correct) / static_cast<double>(n);
  return result;
}

struct ProbeRow {
  std::string task;
  std::size_t n = 0;
  double accuracy = 0.0;  // x100
  std::vector<double> accuracy_per_seed;
};

struct ProbeReport {
  std::string provider;
  std::vector<std::uint64_t> seeds;
  std::vector<ProbeRow> rows;
  std::size_t runs = 1;
};

// ---------------------------------------------------------------------------
// Seed aggregation: arithmetic mean per cell, per-seed values concatenated.

namespace detail {

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline void merge_row(StsRow& into, const StsRow& from) {
  if (into.label != from.label || into.n != from.n) {
    throw InvalidInput("aggregate_seeds: report rows differ (" + into.label + " vs " + from.label + ")");
  }
  if (!from.valid() && into.valid()) into.error = from.error;
  into.spearman_per_seed.insert(into.spearman_per_seed.end(), from.spearman_per_seed.begin(),
                                from.spearman_per_seed.end());
  into.pearson_per_seed.insert(into.pearson_per_seed.end(), from.pearson_per_seed.begin(),
                               from.pearson_per_seed.end());
}

inline void finish_row(StsRow& row) {
  if (!row.valid() || row.spearman_per_seed.empty()) {
    row.spearman = row.pearson = 0.0;
    return;
  }
  row.spearman = mean_of(row.spearman_per_seed);
  row.pearson = mean_of(row.pearson_per_seed);
}

}  // namespace detail

inline StsReport aggregate_seeds(std::span<const StsReport> reports) {
  if (reports.empty()) throw InvalidInput("aggregate_seeds: no reports");
  StsReport out = reports.front();
  out.seeds.clear();
  out.runs = 0;
  auto reset = [](StsRow& r) {
    r.spearman_per_seed.clear();
    r.pearson_per_seed.clear();
    r.error.clear();
  };
  for (auto& r : out.subsets) reset(r);
  reset(out.all);
  for (const auto& rep : reports) {
    if (rep.subsets.size() != out.subsets.size()) {
      throw InvalidInput("aggregate_seeds: reports have different subset counts");
    }
    for (std::size_t i = 0; i < out.subsets.size(); ++i) detail::merge_row(out.subsets[i], rep.subsets[i]);
    detail::merge_row(out.all, rep.all);
    out.seeds.insert(out.seeds.end(), rep.seeds.begin(), rep.seeds.end());
    out.runs += rep.runs;
  }
  for (auto& r : out.subsets) detail::finish_row(r);
  detail::finish_row(out.all);
  return out;
}

inline ProbeReport aggregate_seeds(std::span<const ProbeReport> reports) {
  if (reports.empty()) throw InvalidInput("aggregate_seeds: no reports");
  ProbeReport out = reports.front();
  out.seeds.clear();
  out.runs = 0;
  for (auto& r : out.rows) r.accuracy_per_seed.clear();
  for (const auto& rep : reports) {
    if (rep.rows.size() != out.rows.size()) throw InvalidInput("aggregate_seeds: probe reports differ in shape");
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
      if (rep.rows[i].task != out.rows[i].task || rep.rows[i].n != out.rows[i].n) {
        throw InvalidInput("aggregate_seeds: probe task mismatch (" + out.rows[i].task + ")");
      }
      auto& acc = out.rows[i].accuracy_per_seed;
      acc.insert(acc.end(), rep.rows[i].accuracy_per_seed.begin(), rep.rows[i].accuracy_per_seed.end());
    }
    out.seeds.insert(out.seeds.end(), rep.seeds.begin(), rep.seeds.end());
    out.runs += rep.runs;
  }
  for (auto& r : out.rows) r.accuracy = detail::mean_of(r.accuracy_per_seed);
  return out;
}

inline ProbeReport eval_probes(const EmbeddingProvider& provider, const std::vector<ProbeTask>& tasks,
                               const ProbeConfig& cfg, std::string provider_name = {}) {
  ProbeReport report{std::move(provider_name), {}, {}, 1};
  for (const auto& t : tasks) {
    const auto r = eval_probe(provider, t, cfg);
    report.rows.push_back({t.name, t.sentences.size(), 100.0 * r.accuracy, {100.0 * r.accuracy}});
  }
  return report;
}

}  // namespace sentprobe
