#pragma once

// The two supervision signals as trainable objectives over the toy encoder:
//   NLI:        softmax(W [u; v; |u - v|] + b) over {entailment, contradiction, neutral}
//   definition: softmax(E s + c) over the vocabulary, E tied to the embedding
//               table by default
// plus Adam, the warmup schedule, length-bucketed batching and the trainers
// (single objective and interleaved multi-task).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sentprobe/corpus.hpp"
#include "sentprobe/encoder.hpp"
#include "sentprobe/error.hpp"
#include "sentprobe/numstat.hpp"

namespace sentprobe {

// ---------------------------------------------------------------------------
// Heads

struct NliHead {
  RealMatrix weights;  // 3 x 3d
  RealVector bias;     // 3
  bool use_bias = true;

  // Weights uniform in +-1/sqrt(3d), bias zero.
  static NliHead init(std::size_t dim, Rng& rng, bool use_bias = true) {
    NliHead h{RealMatrix(kNliClasses, 3 * dim), RealVector::zeros(kNliClasses), use_bias};
    const double a = 1.0 / std::sqrt(static_cast<double>(3 * dim));
    for (double& x : h.weights.flat()) x = rng.uniform(-a, a);
    return h;
  }

  std::size_t dim() const noexcept { return weights.cols() / 3; }

  friend bool operator==(const NliHead&, const NliHead&) = default;
};

struct WordPredictionHead {
  bool tied = true;
  RealMatrix weights;  // V x d; unused (empty) when tied
  RealVector bias;     // V

  static WordPredictionHead make_tied(const ToyEncoder& enc) {
    return {true, RealMatrix(), RealVector::zeros(enc.vocab().size())};
  }

  // Untied output weights use the encoder's init range.
  static WordPredictionHead make_untied(const ToyEncoder& enc, Rng& rng) {
    WordPredictionHead h{false, RealMatrix(enc.vocab().size(), enc.dim()),
                         RealVector::zeros(enc.vocab().size())};
    const double a = 0.5 / static_cast<double>(enc.dim());
    for (double& x : h.weights.flat()) x = rng.uniform(-a, a);
    return h;
  }

  const RealMatrix& output_weights(const ToyEncoder& enc) const {
    return tied ? enc.table() : weights;
  }

  friend bool operator==(const WordPredictionHead&, const WordPredictionHead&) = default;
};

// ---------------------------------------------------------------------------
// Pre-tokenized examples

struct EncodedNli {
  std::vector<std::size_t> premise;
  std::vector<std::size_t> hypothesis;
  std::size_t label = 0;
};

struct EncodedDefinition {
  std::vector<std::size_t> definition;
  std::size_t target = 0;
};

inline std::vector<EncodedNli> encode_nli(const ToyEncoder& enc,
                                          std::span<const NliExample> data) {
  std::vector<EncodedNli> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    out.push_back({enc.token_ids(ex.premise), enc.token_ids(ex.hypothesis),
                   static_cast<std::size_t>(ex.label)});
  }
  return out;
}

// Examples whose target word is not in the vocabulary are dropped and
// counted, since predicting [UNK] would corrupt the objective.
inline std::vector<EncodedDefinition> encode_definitions(const ToyEncoder& enc,
                                                         std::span<const DefinitionExample> data,
                                                         std::size_t* dropped = nullptr) {
  std::vector<EncodedDefinition> out;
  std::size_t missing = 0;
  for (const auto& ex : data) {
    const auto words = tokenize(ex.word);
    const auto target = words.size() == 1 ? enc.vocab().find(words[0]) : std::nullopt;
    if (!target) {
      ++missing;
      continue;
    }
    out.push_back({enc.token_ids(ex.definition), *target});
  }
  if (dropped) *dropped = missing;
  return out;
}

// ---------------------------------------------------------------------------
// Forward passes

inline std::vector<double> nli_features(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw InvalidInput("nli_features: dimension mismatch");
  const std::size_t d = u.size();
  std::vector<double> f(3 * d);
  for (std::size_t j = 0; j < d; ++j) {
    f[j] = u[j];
    f[d + j] = v[j];
    f[2 * d + j] = std::abs(u[j] - v[j]);
  }
  return f;
}

inline RealVector nli_forward(std::span<const double> u, std::span<const double> v,
                              const NliHead& head) {
  if (u.size() != v.size() || 3 * u.size() != head.weights.cols()) {
    throw InvalidInput("nli_forward: dimension mismatch");
  }
  const auto f = nli_features(u, v);
  std::vector<double> z(kNliClasses);
  for (std::size_t c = 0; c < kNliClasses; ++c) {
    z[c] = dot(head.weights.row(c), f) + (head.use_bias ? head.bias[c] : 0.0);
  }
  return RealVector(std::move(z));
}

inline RealVector def_forward(std::span<const double> s, const WordPredictionHead& head,
                              const ToyEncoder& enc) {
  const RealMatrix& w = head.output_weights(enc);
  if (s.size() != w.cols()) throw InvalidInput("def_forward: dimension mismatch");
  std::vector<double> z(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) z[i] = dot(w.row(i), s) + head.bias[i];
  return RealVector(std::move(z));
}

// ---------------------------------------------------------------------------
// Losses and analytic gradients (batch means)

struct NliGradients {
  double loss = 0.0;
  RealMatrix table;
  RealMatrix weights;
  std::vector<double> bias;
};

inline NliGradients nli_loss_and_grads(std::span<const EncodedNli> batch, const ToyEncoder& enc,
                                       const NliHead& head) {
  if (batch.empty()) throw InvalidInput("nli_loss_and_grads: empty batch");
  const std::size_t d = enc.dim();
  if (head.weights.cols() != 3 * d) throw InvalidInput("nli_loss_and_grads: head/encoder dim mismatch");
  const Pooling pooling = enc.options().pooling;
  const bool with_cls = enc.options().pool_includes_cls;

  NliGradients g{0.0, RealMatrix(enc.table().rows(), d), RealMatrix(kNliClasses, 3 * d),
                 std::vector<double>(kNliClasses, 0.0)};
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<double> grad_u(d), grad_v(d);

  for (const auto& ex : batch) {
    const auto pu = enc.pool_ids(ex.premise);
    const auto pv = enc.pool_ids(ex.hypothesis);
    const auto f = nli_features(pu.value, pv.value);
    const auto probs = softmax(nli_forward(pu.value, pv.value, head));
    g.loss += cross_entropy(probs, ex.label) * scale;

    std::vector<double> grad_f(3 * d, 0.0);
    for (std::size_t c = 0; c < kNliClasses; ++c) {
      const double dz = (probs[c] - (c == ex.label ? 1.0 : 0.0)) * scale;
      if (head.use_bias) g.bias[c] += dz;
      auto gw = g.weights.row(c);
      auto w = head.weights.row(c);
      for (std::size_t k = 0; k < 3 * d; ++k) {
        gw[k] += dz * f[k];
        grad_f[k] += dz * w[k];
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = pu.value[j] - pv.value[j];
      // subgradient of |x| at 0 is taken as 0
      const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      grad_u[j] = grad_f[j] + sgn * grad_f[2 * d + j];
      grad_v[j] = grad_f[d + j] - sgn * grad_f[2 * d + j];
    }
    pool_rows_backward(ex.premise, pooling, with_cls, pu, grad_u, g.table);
    pool_rows_backward(ex.hypothesis, pooling, with_cls, pv, grad_v, g.table);
  }
  return g;
}

inline NliGradients nli_loss_and_grads(std::span<const NliExample> batch, const ToyEncoder& enc,
                                       const NliHead& head) {
  const auto encoded = encode_nli(enc, batch);
  return nli_loss_and_grads(std::span<const EncodedNli>(encoded), enc, head);
}

struct DefGradients {
  double loss = 0.0;
  RealMatrix table;
  RealMatrix weights;  // untied heads only
  std::vector<double> bias;
  std::size_t dropped = 0;
};

// With a tied head the table gradient carries both the output-layer term
// and the encoder (pooling) term.
inline DefGradients def_loss_and_grads(std::span<const EncodedDefinition> batch,
                                       const ToyEncoder& enc, const WordPredictionHead& head) {
  const std::size_t d = enc.dim();
  const std::size_t vocab = enc.vocab().size();
  if (head.bias.dim() != vocab) throw InvalidInput("def_loss_and_grads: head/vocabulary mismatch");
  if (!head.tied && (head.weights.rows() != vocab || head.weights.cols() != d)) {
    throw InvalidInput("def_loss_and_grads: head/encoder shape mismatch");
  }
  DefGradients g{0.0, RealMatrix(vocab, d), head.tied ? RealMatrix() : RealMatrix(vocab, d),
                 std::vector<double>(vocab, 0.0), 0};
  if (batch.empty()) return g;

  const Pooling pooling = enc.options().pooling;
  const bool with_cls = enc.options().pool_includes_cls;
  const RealMatrix& out_w = head.output_weights(enc);
  RealMatrix& grad_out_w = head.tied ? g.table : g.weights;
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<double> grad_s(d);

  for (const auto& ex : batch) {
    if (ex.target >= vocab) throw InvalidInput("def_loss_and_grads: target out of range");
    const auto ps = enc.pool_ids(ex.definition);
    const auto probs = softmax(def_forward(ps.value, head, enc));
    g.loss += cross_entropy(probs, ex.target) * scale;

    std::fill(grad_s.begin(), grad_s.end(), 0.0);
    for (std::size_t i = 0; i < vocab; ++i) {
      const double dz = (probs[i] - (i == ex.target ? 1.0 : 0.0)) * scale;
      g.bias[i] += dz;
      auto w = out_w.row(i);
      auto gw = grad_out_w.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        grad_s[j] += dz * w[j];
        gw[j] += dz * ps.value[j];
      }
    }
    pool_rows_backward(ex.definition, pooling, with_cls, ps, grad_s, g.table);
  }
  return g;
}

inline DefGradients def_loss_and_grads(std::span<const DefinitionExample> batch,
                                       const ToyEncoder& enc, const WordPredictionHead& head) {
  std::size_t dropped = 0;
  const auto encoded = encode_definitions(enc, batch, &dropped);
  auto g = def_loss_and_grads(std::span<const EncodedDefinition>(encoded), enc, head);
  g.dropped = dropped;
  return g;
}

// ---------------------------------------------------------------------------
// Optimizer and schedule

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moments for one parameter tensor.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      double lr, const AdamConfig& cfg = {}) {
  if (params.size() != grads.size()) throw InvalidInput("adam_step: params/grads shape mismatch");
  if (state.t == 0 && state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw InvalidInput("adam_step: state shape mismatch");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

// Linear warmup from 0 over the first ceil(fraction * total) steps, then
// constant (or, with linear_decay, linearly down to 0 at the last step).
inline double lr_at(std::size_t step, std::size_t total_steps, double base_lr,
                    double warmup_fraction, bool linear_decay = false) {
  if (step < 1 || step > total_steps) {
    throw InvalidInput("lr_at: step " + std::to_string(step) + " outside [1, " +
                       std::to_string(total_steps) + "]");
  }
  const auto warmup = static_cast<std::size_t>(
      std::ceil(warmup_fraction * static_cast<double>(total_steps) - 1e-9));
  if (step <= warmup) return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (!linear_decay) return base_lr;
  return base_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(std::max<std::size_t>(1, total_steps - warmup));
}

// ---------------------------------------------------------------------------
// Batching

using Batch = std::vector<std::size_t>;

inline constexpr std::size_t kDefaultBucketWidth = 8;

// Groups example indices into buckets of `bucket_width` token lengths, cuts
// each shuffled bucket into batches, then shuffles the batch order. Every
// index appears exactly once.
inline std::vector<Batch> smart_batches(std::span<const std::size_t> lengths,
                                        std::size_t batch_size, Rng& rng,
                                        std::size_t bucket_width = kDefaultBucketWidth) {
  if (lengths.empty()) throw InvalidInput("smart_batches: no examples");
  if (batch_size == 0) throw InvalidInput("smart_batches: batch_size must be positive");
  if (bucket_width == 0) throw InvalidInput("smart_batches: bucket_width must be positive");
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < lengths.size(); ++i) buckets[lengths[i] / bucket_width].push_back(i);
  std::vector<Batch> batches;
  for (auto& [key, members] : buckets) {
    rng.shuffle(members);
    for (std::size_t s = 0; s < members.size(); s += batch_size) {
      const auto e = std::min(members.size(), s + batch_size);
      batches.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(s),
                           members.begin() + static_cast<std::ptrdiff_t>(e));
    }
  }
  rng.shuffle(batches);
  return batches;
}

inline std::vector<Batch> shuffled_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (n == 0) throw InvalidInput("shuffled_batches: no examples");
  if (batch_size == 0) throw InvalidInput("shuffled_batches: batch_size must be positive");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<Batch> batches;
  for (std::size_t s = 0; s < n; s += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch_size)));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 1;
  AdamConfig adam;
  double learning_rate = 5e-3;
  double warmup_fraction = 0.10;
  bool linear_decay = false;
  std::uint64_t seed = 0;
  bool smart_batching = true;
  std::size_t bucket_width = kDefaultBucketWidth;
  bool nli_bias = true;
  bool tied_word_head = true;
  bool freeze_word_head = false;
  // Overrides the epoch-derived step count when set.
  std::optional<std::size_t> max_steps;

  void validate() const {
    if (batch_size == 0) throw InvalidInput("TrainConfig: batch_size must be >= 1");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
      throw InvalidInput("TrainConfig: warmup_fraction must be in [0, 1)");
    }
    if (!(learning_rate > 0.0)) throw InvalidInput("TrainConfig: learning_rate must be > 0");
    if (bucket_width == 0) throw InvalidInput("TrainConfig: bucket_width must be >= 1");
  }
};

enum class Objective { kNli, kDefinition };

inline std::string_view to_string(Objective o) { return o == Objective::kNli ? "nli" : "def"; }

struct StepRecord {
  std::size_t step = 0;
  Objective objective = Objective::kNli;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::size_t dropped_definitions = 0;
};

namespace detail {

// Endless stream of batches for one dataset: a fresh shuffled epoch is drawn
// whenever the previous one is exhausted.
class BatchStream {
 public:
  BatchStream(std::vector<std::size_t> lengths, const TrainConfig& cfg, Rng& rng)
      : lengths_(std::move(lengths)), cfg_(cfg), rng_(rng) {}

  const Batch& next() {
    if (cursor_ >= epoch_.size()) {
      epoch_ = draw();
      cursor_ = 0;
      ++epochs_started_;
    }
    return epoch_[cursor_++];
  }

  std::vector<Batch> draw() {
    return cfg_.smart_batching
               ? smart_batches(lengths_, cfg_.batch_size, rng_, cfg_.bucket_width)
               : shuffled_batches(lengths_.size(), cfg_.batch_size, rng_);
  }

  // Batches per epoch; fixed by the lengths, independent of the shuffle.
  std::size_t batches_per_epoch() const {
    if (!cfg_.smart_batching) return (lengths_.size() + cfg_.batch_size - 1) / cfg_.batch_size;
    std::map<std::size_t, std::size_t> sizes;
    for (auto len : lengths_) ++sizes[len / cfg_.bucket_width];
    std::size_t n = 0;
    for (auto [k, c] : sizes) n += (c + cfg_.batch_size - 1) / cfg_.batch_size;
    return n;
  }

  std::size_t epochs_started() const noexcept { return epochs_started_; }

 private:
  std::vector<std::size_t> lengths_;
  const TrainConfig& cfg_;
  Rng& rng_;
  std::vector<Batch> epoch_;
  std::size_t cursor_ = 0;
  std::size_t epochs_started_ = 0;
};

inline std::vector<std::size_t> nli_lengths(const std::vector<EncodedNli>& data) {
  std::vector<std::size_t> out;
  for (const auto& ex : data) out.push_back(std::max(ex.premise.size(), ex.hypothesis.size()) - 1);
  return out;
}

inline std::vector<std::size_t> def_lengths(const std::vector<EncodedDefinition>& data) {
  std::vector<std::size_t> out;
  for (const auto& ex : data) out.push_back(ex.definition.size() - 1);
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& data, const Batch& batch) {
  std::vector<T> out;
  out.reserve(batch.size());
  for (auto i : batch) out.push_back(data[i]);
  return out;
}

// Optimizer state for every trainable tensor of one run.
struct Optimizers {
  AdamState table;
  AdamState nli_weights;
  AdamState nli_bias;
  AdamState def_weights;
  AdamState def_bias;
};

inline double nli_step(ToyEncoder& enc, NliHead& head, std::span<const EncodedNli> batch,
                       Optimizers& opt, double lr, const TrainConfig& cfg) {
  auto g = nli_loss_and_grads(batch, enc, head);
  adam_step(enc.table().flat(), g.table.flat(), opt.table, lr, cfg.adam);
  adam_step(head.weights.flat(), g.weights.flat(), opt.nli_weights, lr, cfg.adam);
  if (head.use_bias) adam_step(head.bias.span(), g.bias, opt.nli_bias, lr, cfg.adam);
  return g.loss;
}

inline double def_step(ToyEncoder& enc, WordPredictionHead& head,
                       std::span<const EncodedDefinition> batch, Optimizers& opt, double lr,
                       const TrainConfig& cfg) {
  auto g = def_loss_and_grads(batch, enc, head);
  adam_step(enc.table().flat(), g.table.flat(), opt.table, lr, cfg.adam);
  if (!cfg.freeze_word_head) {
    if (!head.tied) adam_step(head.weights.flat(), g.weights.flat(), opt.def_weights, lr, cfg.adam);
    adam_step(head.bias.span(), g.bias, opt.def_bias, lr, cfg.adam);
  }
  return g.loss;
}

}  // namespace detail

struct SbertResult {
  NliHead head;
  TrainLog log;
};

struct DefSentResult {
  WordPredictionHead head;
  TrainLog log;
};

struct MultiResult {
  NliHead nli_head;
  WordPredictionHead word_head;
  TrainLog log;
};

// NLI fine-tuning: epochs x batches-per-epoch Adam steps with warmup.
inline SbertResult train_sbert(ToyEncoder& enc, const std::vector<NliExample>& data,
                               const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InvalidInput("train_sbert: no NLI examples");
  Rng rng(cfg.seed);
  SbertResult result{NliHead::init(enc.dim(), rng, cfg.nli_bias), {}};
  const auto encoded = encode_nli(enc, data);
  detail::BatchStream stream(detail::nli_lengths(encoded), cfg, rng);
  const std::size_t total = cfg.max_steps.value_or(cfg.epochs * stream.batches_per_epoch());
  detail::Optimizers opt;
  for (std::size_t step = 1; step <= total; ++step) {
    const double lr = lr_at(step, total, cfg.learning_rate, cfg.warmup_fraction, cfg.linear_decay);
    const auto batch = detail::gather(encoded, stream.next());
    const double loss = detail::nli_step(enc, result.head, batch, opt, lr, cfg);
    result.log.steps.push_back({step, Objective::kNli, loss, lr});
  }
  return result;
}

// Definition-to-word fine-tuning.
inline DefSentResult train_defsent(ToyEncoder& enc, const std::vector<DefinitionExample>& data,
                                   const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InvalidInput("train_defsent: no definitions");
  Rng rng(cfg.seed);
  DefSentResult result{cfg.tied_word_head ? WordPredictionHead::make_tied(enc)
                                          : WordPredictionHead::make_untied(enc, rng),
                       {}};
  const auto encoded = encode_definitions(enc, data, &result.log.dropped_definitions);
  if (encoded.empty()) throw InvalidInput("train_defsent: no definition word is in the vocabulary");
  detail::BatchStream stream(detail::def_lengths(encoded), cfg, rng);
  const std::size_t total = cfg.max_steps.value_or(cfg.epochs * stream.batches_per_epoch());
  detail::Optimizers opt;
  for (std::size_t step = 1; step <= total; ++step) {
    const double lr = lr_at(step, total, cfg.learning_rate, cfg.warmup_fraction, cfg.linear_decay);
    const auto batch = detail::gather(encoded, stream.next());
    const double loss = detail::def_step(enc, result.head, batch, opt, lr, cfg);
    result.log.steps.push_back({step, Objective::kDefinition, loss, lr});
  }
  return result;
}

struct MultiSchedule {
  std::size_t nli_steps_per_cycle = 19;
  std::size_t def_steps_per_cycle = 1;

  std::size_t cycle_length() const { return nli_steps_per_cycle + def_steps_per_cycle; }

  void validate() const {
    if (nli_steps_per_cycle == 0 || def_steps_per_cycle == 0) {
      throw InvalidInput("MultiSchedule: both step counts must be positive");
    }
  }
};

// Objective for each 1-based step: a cycle is the NLI steps, then the
// definition steps.
inline std::vector<Objective> multi_step_plan(std::size_t total_steps, const MultiSchedule& s) {
  s.validate();
  std::vector<Objective> plan(total_steps);
  for (std::size_t i = 0; i < total_steps; ++i) {
    plan[i] = (i % s.cycle_length()) < s.nli_steps_per_cycle ? Objective::kNli
                                                              : Objective::kDefinition;
  }
  return plan;
}

// Enough whole cycles to cover epochs x NLI batches-per-epoch NLI steps.
inline std::size_t multi_total_steps(std::size_t nli_batches, std::size_t epochs,
                                     const MultiSchedule& s) {
  s.validate();
  const std::size_t nli_steps = nli_batches * epochs;
  const std::size_t cycles = (nli_steps + s.nli_steps_per_cycle - 1) / s.nli_steps_per_cycle;
  return cycles * s.cycle_length();
}

// Interleaved multi-task training of one shared encoder. Each objective draws
// from its own batch stream, which reshuffles when exhausted.
inline MultiResult train_multi(ToyEncoder& enc, const std::vector<NliExample>& nli,
                               const std::vector<DefinitionExample>& defs, const TrainConfig& cfg,
                               const MultiSchedule& schedule = {}) {
  cfg.validate();
  schedule.validate();
  if (nli.empty()) throw InvalidInput("train_multi: no NLI examples");
  if (defs.empty()) throw InvalidInput("train_multi: no definitions");
  Rng rng(cfg.seed);
  MultiResult result{NliHead::init(enc.dim(), rng, cfg.nli_bias),
                     cfg.tied_word_head ? WordPredictionHead::make_tied(enc)
                                        : WordPredictionHead::make_untied(enc, rng),
                     {}};
  const auto nli_data = encode_nli(enc, nli);
  const auto def_data = encode_definitions(enc, defs, &result.log.dropped_definitions);
  if (def_data.empty()) throw InvalidInput("train_multi: no definition word is in the vocabulary");
  detail::BatchStream nli_stream(detail::nli_lengths(nli_data), cfg, rng);
  detail::BatchStream def_stream(detail::def_lengths(def_data), cfg, rng);
  const std::size_t total = cfg.max_steps.value_or(
      multi_total_steps(nli_stream.batches_per_epoch(), cfg.epochs, schedule));
  const auto plan = multi_step_plan(total, schedule);
  detail::Optimizers opt;
  for (std::size_t step = 1; step <= total; ++step) {
    const double lr = lr_at(step, total, cfg.learning_rate, cfg.warmup_fraction, cfg.linear_decay);
    double loss;
    if (plan[step - 1] == Objective::kNli) {
      const auto batch = detail::gather(nli_data, nli_stream.next());
      loss = detail::nli_step(enc, result.nli_head, batch, opt, lr, cfg);
    } else {
      const auto batch = detail::gather(def_data, def_stream.next());
      loss = detail::def_step(enc, result.word_head, batch, opt, lr, cfg);
    }
    result.log.steps.push_back({step, plan[step - 1], loss, lr});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Whole-dataset diagnostics

inline double nli_mean_loss(const ToyEncoder& enc, const NliHead& head,
                            const std::vector<NliExample>& data) {
  const auto encoded = encode_nli(enc, data);
  return nli_loss_and_grads(std::span<const EncodedNli>(encoded), enc, head).loss;
}

inline double def_mean_loss(const ToyEncoder& enc, const WordPredictionHead& head,
                            const std::vector<DefinitionExample>& data) {
  return def_loss_and_grads(std::span<const DefinitionExample>(data), enc, head).loss;
}

// Fraction of (in-vocabulary) definitions whose argmax prediction is the word.
inline double def_top1_accuracy(const ToyEncoder& enc, const WordPredictionHead& head,
                                const std::vector<DefinitionExample>& data) {
  const auto encoded = encode_definitions(enc, data);
  if (encoded.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : encoded) {
    const auto z = def_forward(enc.pool_ids(ex.definition).value, head, enc);
    const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    correct += best == ex.target;
  }
  return static_cast<double>(correct) / static_cast<double>(encoded.size());
}

// ---------------------------------------------------------------------------
// Learning-rate selection

inline const std::vector<double>& default_lr_grid() {
  static const std::vector<double> grid{1e-6, 2e-6, 5e-6, 10e-6, 20e-6, 50e-6};
  return grid;
}

struct LrSearchResult {
  double best_lr = 0.0;
  std::vector<double> grid;
  std::vector<double> mean_scores;  // parallel to grid
};

// For each grid value, trains once per seed and averages the validation
// score; the highest mean wins, ties going to the smaller rate.
template <typename TrainFn, typename ScoreFn>
LrSearchResult lr_grid_search(TrainFn&& train, ScoreFn&& score,
                              const std::vector<std::uint64_t>& seeds,
                              std::vector<double> grid = default_lr_grid()) {
  if (grid.empty()) throw InvalidInput("lr_grid_search: empty grid");
  if (seeds.empty()) throw InvalidInput("lr_grid_search: no seeds");
  std::sort(grid.begin(), grid.end());
  LrSearchResult out{grid.front(), grid, {}};
  double best = -std::numeric_limits<double>::infinity();
  for (double lr : grid) {
    double sum = 0.0;
    for (auto seed : seeds) sum += static_cast<double>(score(train(lr, seed)));
    const double mean = sum / static_cast<double>(seeds.size());
    out.mean_scores.push_back(mean);
    if (mean > best) {
      best = mean;
      out.best_lr = lr;
    }
  }
  return out;
}

}  // namespace sentprobe
