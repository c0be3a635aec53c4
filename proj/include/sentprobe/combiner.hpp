#pragma once

// Combining the two supervision signals: post-hoc (Average, Concat over two
// separately trained providers) and in-training (sequential S+D / D+S
// pipelines, interleaved Multi).

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sentprobe/encoder.hpp"
#include "sentprobe/error.hpp"
#include "sentprobe/numstat.hpp"
#include "sentprobe/objectives.hpp"

namespace sentprobe {

inline RealVector combine_average(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("combine_average: dimension mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = 0.5 * (a[i] + b[i]);
  return RealVector(std::move(out));
}

inline RealVector combine_concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return RealVector(std::move(out));
}

enum class CombineMode { kAverage, kConcat };

inline std::string_view to_string(CombineMode m) {
  return m == CombineMode::kAverage ? "average" : "concat";
}

inline CombineMode parse_combine_mode(std::string_view s) {
  if (s == "average") return CombineMode::kAverage;
  if (s == "concat") return CombineMode::kConcat;
  throw InvalidInput("unknown combination \"" + std::string(s) + "\" (average|concat)");
}

// No re-normalization is applied after combining.
class CombinedProvider : public EmbeddingProvider {
 public:
  CombinedProvider(CombineMode mode, std::shared_ptr<const EmbeddingProvider> a,
                   std::shared_ptr<const EmbeddingProvider> b)
      : mode_(mode), a_(std::move(a)), b_(std::move(b)) {
    if (!a_ || !b_) throw InvalidInput("CombinedProvider: null component");
    if (mode_ == CombineMode::kAverage && a_->dim() != b_->dim()) {
      throw InvalidInput("CombinedProvider: average needs equal dimensions (" +
                         std::to_string(a_->dim()) + " vs " + std::to_string(b_->dim()) + ")");
    }
  }

  std::size_t dim() const override {
    return mode_ == CombineMode::kAverage ? a_->dim() : a_->dim() + b_->dim();
  }

  RealVector embed(std::string_view sentence) const override {
    const auto va = a_->embed(sentence);
    const auto vb = b_->embed(sentence);
    return mode_ == CombineMode::kAverage ? combine_average(va, vb) : combine_concat(va, vb);
  }

  CombineMode mode() const noexcept { return mode_; }

 private:
  CombineMode mode_;
  std::shared_ptr<const EmbeddingProvider> a_;
  std::shared_ptr<const EmbeddingProvider> b_;
};

// Methods selectable from the command line. kNone evaluates the untrained encoder.
enum class Method { kNone, kSbert, kDefSent, kSbertThenDef, kDefThenSbert, kMulti, kAverage, kConcat };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::kNone: return "none";
    case Method::kSbert: return "sbert";
    case Method::kDefSent: return "defsent";
    case Method::kSbertThenDef: return "s+d";
    case Method::kDefThenSbert: return "d+s";
    case Method::kMulti: return "multi";
    case Method::kAverage: return "average";
    case Method::kConcat: return "concat";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (auto m : {Method::kNone, Method::kSbert, Method::kDefSent, Method::kSbertThenDef,
                 Method::kDefThenSbert, Method::kMulti, Method::kAverage, Method::kConcat}) {
    if (s == to_string(m)) return m;
  }
  throw InvalidInput("unknown method \"" + std::string(s) +
                     "\" (none|sbert|defsent|s+d|d+s|multi|average|concat)");
}

enum class Stage { kSbert, kDefSent, kMulti };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kSbert: return "sbert";
    case Stage::kDefSent: return "defsent";
    case Stage::kMulti: return "multi";
  }
  return "?";
}

struct PipelineStage {
  Stage stage = Stage::kSbert;
  TrainConfig config;
};

struct PipelineSpec {
  std::vector<PipelineStage> stages;
  MultiSchedule schedule;

  void validate() const {
    if (stages.empty()) throw InvalidInput("PipelineSpec: at least one stage is required");
    for (const auto& s : stages) {
      if (s.stage == Stage::kMulti && stages.size() != 1) {
        throw InvalidInput("PipelineSpec: multi must be the only stage");
      }
    }
  }
};

// Stages for the in-training methods; Average/Concat have no pipeline of
// their own (they combine an sbert and a defsent run).
inline PipelineSpec pipeline_for(Method m, const TrainConfig& cfg) {
  switch (m) {
    case Method::kSbert: return {{{Stage::kSbert, cfg}}, {}};
    case Method::kDefSent: return {{{Stage::kDefSent, cfg}}, {}};
    case Method::kSbertThenDef: return {{{Stage::kSbert, cfg}, {Stage::kDefSent, cfg}}, {}};
    case Method::kDefThenSbert: return {{{Stage::kDefSent, cfg}, {Stage::kSbert, cfg}}, {}};
    case Method::kMulti: return {{{Stage::kMulti, cfg}}, {}};
    default: break;
  }
  throw InvalidInput("method \"" + std::string(to_string(m)) + "\" is not a training pipeline");
}

struct PipelineDatasets {
  const std::vector<NliExample>* nli = nullptr;
  const std::vector<DefinitionExample>* definitions = nullptr;
};

struct StageOutcome {
  Stage stage = Stage::kSbert;
  TrainLog log;
};

struct PipelineResult {
  std::optional<NliHead> nli_head;
  std::optional<WordPredictionHead> word_head;
  std::vector<StageOutcome> stages;
};

// Runs the stages in order on the same encoder parameters.
inline PipelineResult run_pipeline(const PipelineSpec& spec, ToyEncoder& enc,
                                   const PipelineDatasets& data) {
  spec.validate();
  auto need_nli = [&](Stage s) -> const std::vector<NliExample>& {
    if (!data.nli || data.nli->empty()) {
      throw InvalidInput("stage " + std::string(to_string(s)) + " needs an NLI dataset");
    }
    return *data.nli;
  };
  auto need_defs = [&](Stage s) -> const std::vector<DefinitionExample>& {
    if (!data.definitions || data.definitions->empty()) {
      throw InvalidInput("stage " + std::string(to_string(s)) + " needs a definitions dataset");
    }
    return *data.definitions;
  };
  for (const auto& s : spec.stages) {
    if (s.stage != Stage::kDefSent) need_nli(s.stage);
    if (s.stage != Stage::kSbert) need_defs(s.stage);
  }

  PipelineResult result;
  for (const auto& s : spec.stages) {
    switch (s.stage) {
      case Stage::kSbert: {
        auto r = train_sbert(enc, need_nli(s.stage), s.config);
        result.nli_head = std::move(r.head);
        result.stages.push_back({s.stage, std::move(r.log)});
        break;
      }
      case Stage::kDefSent: {
        auto r = train_defsent(enc, need_defs(s.stage), s.config);
        result.word_head = std::move(r.head);
        result.stages.push_back({s.stage, std::move(r.log)});
        break;
      }
      case Stage::kMulti: {
        auto r = train_multi(enc, need_nli(s.stage), need_defs(s.stage), s.config, spec.schedule);
        result.nli_head = std::move(r.nli_head);
        result.word_head = std::move(r.word_head);
        result.stages.push_back({s.stage, std::move(r.log)});
        break;
      }
    }
  }
  return result;
}

}  // namespace sentprobe
