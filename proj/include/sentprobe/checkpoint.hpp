#pragma once

// Versioned JSON checkpoints: vocabulary, embedding table, heads and the
// training configuration of one run. Average/Concat runs store both
// component encoders plus the combination mode.

#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentprobe/combiner.hpp"
#include "sentprobe/encoder.hpp"
#include "sentprobe/error.hpp"
#include "sentprobe/objectives.hpp"

namespace sentprobe {

inline constexpr std::string_view kCheckpointFormat = "sentprobe-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct EncoderBundle {
  std::string role;  // "sbert", "defsent", "s+d", ...
  ToyEncoder encoder;
  std::optional<NliHead> nli_head;
  std::optional<WordPredictionHead> word_head;
};

struct Checkpoint {
  Method method = Method::kNone;
  std::uint64_t seed = 0;
  TrainConfig config;
  std::optional<CombineMode> combine;
  std::vector<EncoderBundle> encoders;
};

namespace detail {

using nlohmann::json;

inline json matrix_to_json(const RealMatrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

inline RealMatrix matrix_from_json(const json& j) {
  const std::size_t rows = j.size();
  if (rows == 0) throw InvalidInput("checkpoint: empty matrix");
  const std::size_t cols = j.at(0).size();
  std::vector<double> values;
  values.reserve(rows * cols);
  for (const auto& row : j) {
    if (row.size() != cols) throw InvalidInput("checkpoint: ragged matrix");
    for (const auto& x : row) values.push_back(x.get<double>());
  }
  return RealMatrix(rows, cols, std::move(values));
}

inline json config_to_json(const TrainConfig& c) {
  json j = {{"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"adam_beta1", c.adam.beta1},
            {"adam_beta2", c.adam.beta2},
            {"adam_epsilon", c.adam.epsilon},
            {"warmup_fraction", c.warmup_fraction},
            {"linear_decay", c.linear_decay},
            {"seed", c.seed},
            {"smart_batching", c.smart_batching},
            {"bucket_width", c.bucket_width},
            {"nli_bias", c.nli_bias},
            {"tied_word_head", c.tied_word_head},
            {"freeze_word_head", c.freeze_word_head}};
  j["max_steps"] = c.max_steps ? json(*c.max_steps) : json(nullptr);
  return j;
}

inline TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.adam.beta1 = j.at("adam_beta1").get<double>();
  c.adam.beta2 = j.at("adam_beta2").get<double>();
  c.adam.epsilon = j.at("adam_epsilon").get<double>();
  c.warmup_fraction = j.at("warmup_fraction").get<double>();
  c.linear_decay = j.at("linear_decay").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.smart_batching = j.at("smart_batching").get<bool>();
  c.bucket_width = j.at("bucket_width").get<std::size_t>();
  c.nli_bias = j.at("nli_bias").get<bool>();
  c.tied_word_head = j.at("tied_word_head").get<bool>();
  c.freeze_word_head = j.at("freeze_word_head").get<bool>();
  if (!j.at("max_steps").is_null()) c.max_steps = j.at("max_steps").get<std::size_t>();
  return c;
}

inline json bundle_to_json(const EncoderBundle& b) {
  const auto& enc = b.encoder;
  const auto& words = enc.vocab().words();
  json j = {{"role", b.role},
            {"pooling", std::string(to_string(enc.options().pooling))},
            {"pool_includes_cls", enc.options().pool_includes_cls},
            {"max_length", enc.options().max_length},
            {"dim", enc.dim()},
            {"vocab", std::vector<std::string>(words.begin() + 2, words.end())},
            {"table", matrix_to_json(enc.table())}};
  if (b.nli_head) {
    j["nli_head"] = {{"weights", matrix_to_json(b.nli_head->weights)},
                     {"bias", b.nli_head->bias.values()},
                     {"use_bias", b.nli_head->use_bias}};
  } else {
    j["nli_head"] = nullptr;
  }
  if (b.word_head) {
    j["word_head"] = {{"tied", b.word_head->tied}, {"bias", b.word_head->bias.values()}};
    j["word_head"]["weights"] =
        b.word_head->tied ? json(nullptr) : matrix_to_json(b.word_head->weights);
  } else {
    j["word_head"] = nullptr;
  }
  return j;
}

inline EncoderBundle bundle_from_json(const json& j) {
  EncoderOptions opts;
  opts.pooling = parse_pooling(j.at("pooling").get<std::string>());
  opts.pool_includes_cls = j.at("pool_includes_cls").get<bool>();
  opts.max_length = j.at("max_length").get<std::size_t>();
  Vocabulary vocab(j.at("vocab").get<std::vector<std::string>>());
  ToyEncoder enc(std::move(vocab), matrix_from_json(j.at("table")), opts);
  if (enc.dim() != j.at("dim").get<std::size_t>()) throw InvalidInput("checkpoint: dim mismatch");
  EncoderBundle b{j.at("role").get<std::string>(), std::move(enc), std::nullopt, std::nullopt};
  if (!j.at("nli_head").is_null()) {
    const auto& h = j.at("nli_head");
    b.nli_head = NliHead{matrix_from_json(h.at("weights")),
                         RealVector(h.at("bias").get<std::vector<double>>()),
                         h.at("use_bias").get<bool>()};
  }
  if (!j.at("word_head").is_null()) {
    const auto& h = j.at("word_head");
    const bool tied = h.at("tied").get<bool>();
    b.word_head = WordPredictionHead{tied, tied ? RealMatrix() : matrix_from_json(h.at("weights")),
                                     RealVector(h.at("bias").get<std::vector<double>>())};
  }
  return b;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& c) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["method"] = std::string(to_string(c.method));
  j["seed"] = c.seed;
  j["config"] = detail::config_to_json(c.config);
  j["combine"] = c.combine ? nlohmann::json(std::string(to_string(*c.combine))) : nlohmann::json(nullptr);
  j["encoders"] = nlohmann::json::array();
  for (const auto& b : c.encoders) j["encoders"].push_back(detail::bundle_to_json(b));
  return j.dump() + "\n";
}

inline Checkpoint parse_checkpoint(const std::string& text, const std::string& source = "<checkpoint>") {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw InvalidInput("not a sentprobe checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw InvalidInput("unsupported checkpoint version " + j.at("version").dump());
    }
    Checkpoint c;
    c.method = parse_method(j.at("method").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.config = detail::config_from_json(j.at("config"));
    if (!j.at("combine").is_null()) c.combine = parse_combine_mode(j.at("combine").get<std::string>());
    for (const auto& b : j.at("encoders")) c.encoders.push_back(detail::bundle_from_json(b));
    if (c.encoders.empty()) throw InvalidInput("checkpoint holds no encoder");
    if (c.combine && c.encoders.size() != 2) throw InvalidInput("combined checkpoint needs two encoders");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source, 0, e.what());
  } catch (const InvalidInput& e) {
    throw ParseError(source, 0, e.what());
  }
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << serialize_checkpoint(c);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open checkpoint");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), path);
}

// The embedding provider a checkpoint describes.
inline std::shared_ptr<const EmbeddingProvider> make_provider(const Checkpoint& c) {
  if (!c.combine) return std::make_shared<ToyEncoder>(c.encoders.front().encoder);
  return std::make_shared<CombinedProvider>(*c.combine,
                                            std::make_shared<ToyEncoder>(c.encoders[0].encoder),
                                            std::make_shared<ToyEncoder>(c.encoders[1].encoder));
}

}  // namespace sentprobe
