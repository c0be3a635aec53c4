#pragma once

// Embedding providers: the trainable toy encoder (vocabulary + embedding
// table + pooling) and the dump-backed EmbeddingStore.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sentprobe/corpus.hpp"
#include "sentprobe/error.hpp"
#include "sentprobe/numstat.hpp"

namespace sentprobe {

// Anything that maps a sentence to a fixed-dimension vector.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual RealVector embed(std::string_view sentence) const = 0;
};

inline RealVector embed(const EmbeddingProvider& provider, std::string_view sentence) {
  return provider.embed(sentence);
}

enum class Pooling { kCls, kMean, kMax };

inline std::string_view to_string(Pooling p) {
  switch (p) {
    case Pooling::kCls: return "cls";
    case Pooling::kMean: return "mean";
    case Pooling::kMax: return "max";
  }
  return "?";
}

inline Pooling parse_pooling(std::string_view s) {
  if (s == "cls") return Pooling::kCls;
  if (s == "mean") return Pooling::kMean;
  if (s == "max") return Pooling::kMax;
  throw InvalidInput("unknown pooling strategy \"" + std::string(s) + "\" (cls|mean|max)");
}

class Vocabulary {
 public:
  static constexpr std::size_t kCls = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::string_view kClsToken = "[CLS]";
  static constexpr std::string_view kUnkToken = "[UNK]";

  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  // `words` excludes the two reserved entries; they are prepended.
  explicit Vocabulary(const std::vector<std::string>& words) {
    add(std::string(kClsToken));
    add(std::string(kUnkToken));
    for (const auto& w : words) {
      if (w.empty()) throw InvalidInput("Vocabulary: empty word");
      if (index_.count(w)) throw InvalidInput("Vocabulary: duplicate word \"" + w + "\"");
      add(w);
    }
  }

  std::size_t size() const noexcept { return words_.size(); }

  std::optional<std::size_t> find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_or_unk(std::string_view word) const { return find(word).value_or(kUnk); }

  const std::string& word(std::size_t i) const { return words_.at(i); }

  // All entries including the reserved ones, in index order.
  const std::vector<std::string>& words() const noexcept { return words_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  void add(std::string w) {
    index_.emplace(w, words_.size());
    words_.push_back(std::move(w));
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Words with frequency >= min_count, ordered by descending frequency, then
// lexicographically.
inline Vocabulary build_vocab(const std::vector<std::string>& texts, std::size_t min_count = 1) {
  if (texts.empty()) throw InvalidInput("build_vocab: empty corpus");
  if (min_count == 0) throw InvalidInput("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& w : tokenize(t)) ++counts[std::move(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, c] : counts) {
    if (c >= min_count) kept.emplace_back(w, c);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  words.reserve(kept.size());
  for (auto& [w, c] : kept) words.push_back(std::move(w));
  return Vocabulary(words);
}

// Pooled value over rows of `table` selected by `ids` (position 0 is [CLS]).
// For max pooling `argmax[j]` is the position that won component j.
struct PooledRows {
  std::vector<double> value;
  std::vector<std::size_t> argmax;
};

inline PooledRows pool_rows(const RealMatrix& table, std::span<const std::size_t> ids,
                            Pooling strategy, bool include_cls = false) {
  if (ids.empty()) throw InvalidInput("pool: empty sequence");
  const std::size_t d = table.cols();
  PooledRows out{std::vector<double>(d, 0.0), {}};
  if (strategy == Pooling::kCls) {
    auto r = table.row(ids[0]);
    std::copy(r.begin(), r.end(), out.value.begin());
    return out;
  }
  const std::size_t first = include_cls ? 0 : 1;
  if (ids.size() <= first) throw InvalidInput("pool: no word positions to pool");
  if (strategy == Pooling::kMean) {
    for (std::size_t p = first; p < ids.size(); ++p) {
      auto r = table.row(ids[p]);
      for (std::size_t j = 0; j < d; ++j) out.value[j] += r[j];
    }
    const double n = static_cast<double>(ids.size() - first);
    for (double& x : out.value) x /= n;
    return out;
  }
  out.argmax.assign(d, first);
  auto r0 = table.row(ids[first]);
  std::copy(r0.begin(), r0.end(), out.value.begin());
  for (std::size_t p = first + 1; p < ids.size(); ++p) {
    auto r = table.row(ids[p]);
    for (std::size_t j = 0; j < d; ++j) {
      if (r[j] > out.value[j]) {
        out.value[j] = r[j];
        out.argmax[j] = p;
      }
    }
  }
  return out;
}

// Accumulates d(loss)/d(table) given d(loss)/d(pooled).
inline void pool_rows_backward(std::span<const std::size_t> ids, Pooling strategy,
                               bool include_cls, const PooledRows& forward,
                               std::span<const double> grad_pooled, RealMatrix& grad_table) {
  const std::size_t d = grad_table.cols();
  switch (strategy) {
    case Pooling::kCls: {
      auto g = grad_table.row(ids[0]);
      for (std::size_t j = 0; j < d; ++j) g[j] += grad_pooled[j];
      return;
    }
    case Pooling::kMean: {
      const std::size_t first = include_cls ? 0 : 1;
      const double inv = 1.0 / static_cast<double>(ids.size() - first);
      for (std::size_t p = first; p < ids.size(); ++p) {
        auto g = grad_table.row(ids[p]);
        for (std::size_t j = 0; j < d; ++j) g[j] += grad_pooled[j] * inv;
      }
      return;
    }
    case Pooling::kMax:
      for (std::size_t j = 0; j < d; ++j) grad_table(ids[forward.argmax[j]], j) += grad_pooled[j];
      return;
  }
}

// Pooling over already-materialized token vectors; position 0 is [CLS].
inline RealVector pool(const std::vector<RealVector>& token_vectors, Pooling strategy,
                       bool include_cls = false) {
  if (token_vectors.empty()) throw InvalidInput("pool: empty sequence");
  const std::size_t d = token_vectors.front().dim();
  RealMatrix rows(token_vectors.size(), d);
  std::vector<std::size_t> ids(token_vectors.size());
  for (std::size_t i = 0; i < token_vectors.size(); ++i) {
    if (token_vectors[i].dim() != d) throw InvalidInput("pool: non-uniform dimensions");
    std::copy(token_vectors[i].begin(), token_vectors[i].end(), rows.row(i).begin());
    ids[i] = i;
  }
  return RealVector(pool_rows(rows, ids, strategy, include_cls).value);
}

struct EncoderOptions {
  Pooling pooling = Pooling::kMean;
  // Mean/Max normally skip the [CLS] position, which carries no content here.
  bool pool_includes_cls = false;
  // Positions including [CLS]; longer inputs are truncated.
  std::size_t max_length = 128;
};

// Toy stand-in for a pre-trained transformer: each position's vector is the
// table row of its token; there is no context mixing.
class ToyEncoder : public EmbeddingProvider {
 public:
  // Rows drawn uniformly from [-0.5/d, 0.5/d].
  ToyEncoder(Vocabulary vocab, std::size_t dim, Rng& rng, EncoderOptions options = {})
      : vocab_(std::move(vocab)), table_(vocab_.size(), dim), options_(options) {
    if (dim == 0) throw InvalidInput("ToyEncoder: dimension must be positive");
    const double a = 0.5 / static_cast<double>(dim);
    for (double& x : table_.flat()) x = rng.uniform(-a, a);
    validate();
  }

  ToyEncoder(Vocabulary vocab, RealMatrix table, EncoderOptions options = {})
      : vocab_(std::move(vocab)), table_(std::move(table)), options_(options) {
    validate();
  }

  std::size_t dim() const override { return table_.cols(); }

  const Vocabulary& vocab() const noexcept { return vocab_; }
  const RealMatrix& table() const noexcept { return table_; }
  RealMatrix& table() noexcept { return table_; }
  const EncoderOptions& options() const noexcept { return options_; }

  // [CLS] followed by word ids; a sentence with no words becomes [CLS] [UNK].
  std::vector<std::size_t> token_ids(std::string_view sentence) const {
    return ids_for(tokenize(sentence));
  }

  std::vector<std::size_t> ids_for(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> ids{Vocabulary::kCls};
    for (const auto& t : tokens) {
      if (ids.size() >= options_.max_length) break;
      ids.push_back(vocab_.index_or_unk(t));
    }
    if (ids.size() == 1) ids.push_back(Vocabulary::kUnk);
    return ids;
  }

  PooledRows pool_ids(std::span<const std::size_t> ids) const {
    return pool_rows(table_, ids, options_.pooling, options_.pool_includes_cls);
  }

  RealVector embed(std::string_view sentence) const override {
    const auto ids = token_ids(sentence);
    return RealVector(pool_ids(ids).value);
  }

  friend bool operator==(const ToyEncoder& a, const ToyEncoder& b) {
    return a.vocab_ == b.vocab_ && a.table_ == b.table_ &&
           a.options_.pooling == b.options_.pooling &&
           a.options_.pool_includes_cls == b.options_.pool_includes_cls &&
           a.options_.max_length == b.options_.max_length;
  }

 private:
  void validate() const {
    if (table_.rows() != vocab_.size()) {
      throw InvalidInput("ToyEncoder: table has " + std::to_string(table_.rows()) +
                         " rows for a vocabulary of " + std::to_string(vocab_.size()));
    }
    if (options_.max_length < 2) throw InvalidInput("ToyEncoder: max_length must be >= 2");
  }

  Vocabulary vocab_;
  RealMatrix table_;
  EncoderOptions options_;
};

// [CLS] row followed by one row per token (unknown words use [UNK]).
inline std::vector<RealVector> encode_tokens(const ToyEncoder& enc,
                                             const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw InvalidInput("encode_tokens: empty token list");
  std::vector<RealVector> out;
  for (std::size_t id : enc.ids_for(tokens)) {
    auto r = enc.table().row(id);
    out.emplace_back(std::vector<double>(r.begin(), r.end()));
  }
  return out;
}

// Sentence -> vector lookup table, typically produced by an external model.
class EmbeddingStore : public EmbeddingProvider {
 public:
  explicit EmbeddingStore(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw InvalidInput("EmbeddingStore: dimension must be positive");
  }

  std::size_t dim() const override { return dim_; }
  std::size_t size() const noexcept { return keys_.size(); }

  void insert(std::string sentence, RealVector vector) {
    if (sentence.empty()) throw InvalidInput("EmbeddingStore: empty sentence key");
    if (sentence.find_first_of("\t\n\r") != std::string::npos) {
      throw InvalidInput("EmbeddingStore: sentence key contains tab or newline");
    }
    if (vector.dim() != dim_) {
      throw InvalidInput("EmbeddingStore: vector dim " + std::to_string(vector.dim()) +
                         " != store dim " + std::to_string(dim_));
    }
    if (index_.count(sentence)) throw InvalidInput("EmbeddingStore: duplicate key \"" + sentence + "\"");
    index_.emplace(sentence, vectors_.size());
    keys_.push_back(std::move(sentence));
    vectors_.push_back(std::move(vector));
  }

  bool contains(std::string_view sentence) const { return index_.count(std::string(sentence)) > 0; }

  RealVector embed(std::string_view sentence) const override {
    auto it = index_.find(std::string(sentence));
    if (it == index_.end()) throw MissingEmbedding(std::string(sentence));
    return vectors_[it->second];
  }

  // Insertion order.
  const std::vector<std::string>& keys() const noexcept { return keys_; }
  const RealVector& vector_at(std::size_t i) const { return vectors_.at(i); }

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dim_ == b.dim_ && a.keys_ == b.keys_ && a.vectors_ == b.vectors_;
  }

 private:
  std::size_t dim_;
  std::vector<std::string> keys_;
  std::vector<RealVector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Dump format: "dim=<d>" then "<sentence>\t<v1> <v2> ... <vd>" per line,
// values in shortest round-trip decimal.
inline void write_dump(const EmbeddingStore& store, std::ostream& out) {
  out << "dim=" << store.dim() << '\n';
  for (std::size_t i = 0; i < store.size(); ++i) {
    out << store.keys()[i] << '\t';
    const auto& v = store.vector_at(i);
    for (std::size_t j = 0; j < v.dim(); ++j) {
      if (j) out << ' ';
      out << format_double(v[j]);
    }
    out << '\n';
  }
}

inline void save_dump(const EmbeddingStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_dump(store, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline EmbeddingStore read_dump(std::istream& in, const std::string& source = "<dump>") {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing dim header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("dim=", 0) != 0) throw ParseError(source, 1, "expected header \"dim=<d>\"");
  std::size_t dim = 0;
  {
    const std::string_view digits(line.data() + 4, line.size() - 4);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), dim);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || dim == 0) {
      throw ParseError(source, 1, "invalid dimension in header");
    }
  }
  EmbeddingStore store(dim);
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source, lineno, "missing tab separator");
    std::string key = line.substr(0, tab);
    std::string_view rest(line.data() + tab + 1, line.size() - tab - 1);
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos < rest.size()) {
      auto sp = rest.find(' ', pos);
      if (sp == std::string_view::npos) sp = rest.size();
      try {
        values.push_back(parse_double(rest.substr(pos, sp - pos)));
      } catch (const InvalidInput& e) {
        throw ParseError(source, lineno, e.what());
      }
      pos = sp + 1;
    }
    if (values.size() != dim) {
      throw ParseError(source, lineno,
                       "row has " + std::to_string(values.size()) + " values, header says " +
                           std::to_string(dim));
    }
    try {
      store.insert(std::move(key), RealVector(std::move(values)));
    } catch (const InvalidInput& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return store;
}

inline EmbeddingStore load_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return read_dump(in, path);
}

}  // namespace sentprobe
