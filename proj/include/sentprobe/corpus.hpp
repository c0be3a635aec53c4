#pragma once

// Dataset records, TSV readers/writers, tokenization, the Dice coefficient
// and the two STS partitioning schemes (by source, by Dice quantile).

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "sentprobe/error.hpp"

namespace sentprobe {

enum class Split { kNone, kTrain, kDev, kTest };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
    case Split::kNone: break;
  }
  return "none";
}

struct StsPair {
  std::string sentence1;
  std::string sentence2;
  double gold = 0.0;
  std::string source;
  Split split = Split::kNone;

  friend bool operator==(const StsPair&, const StsPair&) = default;
};

enum class NliLabel { kEntailment = 0, kContradiction = 1, kNeutral = 2 };

inline constexpr std::size_t kNliClasses = 3;

inline std::string_view to_string(NliLabel l) {
  switch (l) {
    case NliLabel::kEntailment: return "entailment";
    case NliLabel::kContradiction: return "contradiction";
    case NliLabel::kNeutral: return "neutral";
  }
  return "?";
}

struct NliExample {
  std::string premise;
  std::string hypothesis;
  NliLabel label = NliLabel::kNeutral;
};

struct DefinitionExample {
  std::string word;
  std::string definition;
};

using WordSet = std::set<std::string>;

struct LabeledSubset {
  std::string label;
  std::vector<StsPair> pairs;
};

struct Partition {
  std::string name;
  std::vector<LabeledSubset> subsets;
};

namespace detail {

inline bool decode_utf8(std::string_view s, std::size_t& pos, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  std::size_t len = 1;
  if (b0 < 0x80) {
    cp = b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    cp = b0 & 0x1F;
    len = 2;
  } else if ((b0 & 0xF0) == 0xE0) {
    cp = b0 & 0x0F;
    len = 3;
  } else if ((b0 & 0xF8) == 0xF0) {
    cp = b0 & 0x07;
    len = 4;
  } else {
    cp = b0;  // stray byte, passed through
    ++pos;
    return false;
  }
  if (pos + len > s.size()) {
    cp = b0;
    ++pos;
    return false;
  }
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) {
      cp = b0;
      ++pos;
      return false;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += len;
  return true;
}

inline void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline bool is_space(char32_t c) {
  return c == U' ' || (c >= U'\t' && c <= U'\r') || c == 0x85 || c == 0xA0 ||
         c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 ||
         c == 0x202F || c == 0x205F || c == 0x3000;
}

// ASCII letters/digits count as alphanumeric; outside ASCII everything does
// except the common punctuation and symbol blocks.
inline bool is_alnum(char32_t c) {
  if (c < 0x80) {
    return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9');
  }
  if (c >= 0x80 && c <= 0xBF) return false;
  if (c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x2BFF) return false;
  if (c >= 0x3000 && c <= 0x303F) return false;
  if (c >= 0xFF01 && c <= 0xFF0F) return false;
  if (c >= 0xFF1A && c <= 0xFF20) return false;
  if (c >= 0xFE30 && c <= 0xFE4F) return false;
  return true;
}

inline char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  return c;
}

}  // namespace detail

// Lowercase, split on whitespace, strip non-alphanumeric characters from both
// ends of each token, drop tokens left empty. "guitar." and "Guitar" are the
// same word; "can't" keeps its apostrophe.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::vector<char32_t> current;
  auto flush = [&] {
    std::size_t b = 0, e = current.size();
    while (b < e && !detail::is_alnum(current[b])) ++b;
    while (e > b && !detail::is_alnum(current[e - 1])) --e;
    if (b < e) {
      std::string word;
      for (std::size_t i = b; i < e; ++i) detail::encode_utf8(detail::to_lower(current[i]), word);
      tokens.push_back(std::move(word));
    }
    current.clear();
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp;
    detail::decode_utf8(text, pos, cp);
    if (detail::is_space(cp)) {
      flush();
    } else {
      current.push_back(cp);
    }
  }
  flush();
  return tokens;
}

inline WordSet word_set(std::string_view text) {
  auto tokens = tokenize(text);
  return WordSet(tokens.begin(), tokens.end());
}

// 2|W1 ∩ W2| / (|W1| + |W2|) over word types.
inline double dice(std::string_view s1, std::string_view s2) {
  const WordSet w1 = word_set(s1);
  const WordSet w2 = word_set(s2);
  if (w1.empty() || w2.empty()) throw InvalidInput("dice: sentence has no words after tokenization");
  std::size_t common = 0;
  for (const auto& w : w1) common += w2.count(w);
  return 2.0 * static_cast<double>(common) / static_cast<double>(w1.size() + w2.size());
}

inline double dice(const StsPair& p) { return dice(p.sentence1, p.sentence2); }

// One subset per distinct source, in order of first appearance.
inline Partition partition_by_source(const std::vector<StsPair>& pairs) {
  Partition out{"source", {}};
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.source.empty()) {
      throw InvalidInput("partition_by_source: pair " + std::to_string(i) + " has no source tag");
    }
    auto [it, inserted] = index.try_emplace(p.source, out.subsets.size());
    if (inserted) out.subsets.push_back({p.source, {}});
    out.subsets[it->second].pairs.push_back(p);
  }
  return out;
}

inline std::string quantile_label(std::size_t i, std::size_t k) {
  auto pct = [k](std::size_t j) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", 100.0 * static_cast<double>(j) / static_cast<double>(k));
    return std::string(buf);
  };
  return pct(i) + "-" + pct(i + 1) + "%";
}

// Sizes of k contiguous groups over n items; earlier groups absorb the remainder.
inline std::vector<std::size_t> balanced_sizes(std::size_t n, std::size_t k) {
  std::vector<std::size_t> sizes(k, n / k);
  for (std::size_t i = 0; i < n % k; ++i) ++sizes[i];
  return sizes;
}

// Stable ascending sort by Dice, then k near-equal contiguous groups.
inline Partition partition_by_dice(const std::vector<StsPair>& pairs, std::size_t k = 5) {
  if (k == 0) throw InvalidInput("partition_by_dice: k must be positive");
  if (pairs.size() < k) {
    throw InvalidInput("partition_by_dice: " + std::to_string(pairs.size()) +
                       " pairs cannot fill " + std::to_string(k) + " subsets");
  }
  std::vector<double> scores(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) scores[i] = dice(pairs[i]);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  Partition out{"dice", {}};
  std::size_t cursor = 0;
  const auto sizes = balanced_sizes(pairs.size(), k);
  for (std::size_t g = 0; g < k; ++g) {
    LabeledSubset subset{quantile_label(g, k), {}};
    subset.pairs.reserve(sizes[g]);
    for (std::size_t j = 0; j < sizes[g]; ++j) subset.pairs.push_back(pairs[order[cursor++]]);
    out.subsets.push_back(std::move(subset));
  }
  return out;
}

inline std::vector<StsPair> concat_subsets(const Partition& partition) {
  std::vector<StsPair> all;
  for (const auto& s : partition.subsets) all.insert(all.end(), s.pairs.begin(), s.pairs.end());
  return all;
}

// ---------------------------------------------------------------------------
// TSV readers. One record per nonempty line; a trailing CR is tolerated.

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return cols;
}

template <typename Fn>
void for_each_record(std::istream& in, const std::string& source, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(split_tabs(line), lineno, source);
  }
}

inline void require_columns(const std::vector<std::string_view>& cols, std::size_t n,
                            std::size_t lineno, const std::string& source) {
  if (cols.size() != n) {
    throw ParseError(source, lineno,
                     "expected " + std::to_string(n) + " tab-separated columns, got " +
                         std::to_string(cols.size()));
  }
}

inline std::string nonempty_field(std::string_view field, const char* name, std::size_t lineno,
                                  const std::string& source) {
  if (field.empty()) throw ParseError(source, lineno, std::string("empty ") + name);
  return std::string(field);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return in;
}

}  // namespace detail

inline double parse_double(std::string_view text) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw InvalidInput("not a number: \"" + std::string(text) + "\"");
  }
  return value;
}

// Shortest decimal that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

inline std::vector<StsPair> read_sts(std::istream& in, const std::string& source = "<sts>") {
  std::vector<StsPair> pairs;
  detail::for_each_record(in, source, [&](const auto& cols, std::size_t lineno, const auto& src) {
    detail::require_columns(cols, 4, lineno, src);
    StsPair p;
    p.source = detail::nonempty_field(cols[0], "source tag", lineno, src);
    try {
      p.gold = parse_double(cols[1]);
    } catch (const InvalidInput& e) {
      throw ParseError(src, lineno, e.what());
    }
    if (!(p.gold >= 0.0 && p.gold <= 5.0)) {
      throw ParseError(src, lineno, "gold score " + std::string(cols[1]) + " outside [0,5]");
    }
    p.sentence1 = detail::nonempty_field(cols[2], "sentence1", lineno, src);
    p.sentence2 = detail::nonempty_field(cols[3], "sentence2", lineno, src);
    pairs.push_back(std::move(p));
  });
  return pairs;
}

inline std::vector<StsPair> load_sts(const std::string& path) {
  auto in = detail::open_input(path);
  return read_sts(in, path);
}

inline std::optional<NliLabel> parse_nli_label(std::string_view s) {
  if (s == "entailment") return NliLabel::kEntailment;
  if (s == "contradiction") return NliLabel::kContradiction;
  if (s == "neutral") return NliLabel::kNeutral;
  return std::nullopt;
}

inline std::vector<NliExample> read_nli(std::istream& in, const std::string& source = "<nli>") {
  std::vector<NliExample> out;
  detail::for_each_record(in, source, [&](const auto& cols, std::size_t lineno, const auto& src) {
    detail::require_columns(cols, 3, lineno, src);
    const auto label = parse_nli_label(cols[0]);
    if (!label) throw ParseError(src, lineno, "unknown NLI label \"" + std::string(cols[0]) + "\"");
    out.push_back({detail::nonempty_field(cols[1], "premise", lineno, src),
                   detail::nonempty_field(cols[2], "hypothesis", lineno, src), *label});
  });
  return out;
}

inline std::vector<NliExample> load_nli(const std::string& path) {
  auto in = detail::open_input(path);
  return read_nli(in, path);
}

inline std::vector<DefinitionExample> read_definitions(std::istream& in,
                                                       const std::string& source = "<defs>") {
  std::vector<DefinitionExample> out;
  detail::for_each_record(in, source, [&](const auto& cols, std::size_t lineno, const auto& src) {
    detail::require_columns(cols, 2, lineno, src);
    auto word = detail::nonempty_field(cols[0], "word", lineno, src);
    for (char c : word) {
      if (c == ' ' || (c >= '\t' && c <= '\r')) {
        throw ParseError(src, lineno, "word \"" + word + "\" contains whitespace");
      }
    }
    out.push_back({std::move(word), detail::nonempty_field(cols[1], "definition", lineno, src)});
  });
  return out;
}

inline std::vector<DefinitionExample> load_definitions(const std::string& path) {
  auto in = detail::open_input(path);
  return read_definitions(in, path);
}

inline void write_sts(std::ostream& out, const std::vector<StsPair>& pairs) {
  for (const auto& p : pairs) {
    out << p.source << '\t' << format_double(p.gold) << '\t' << p.sentence1 << '\t'
        << p.sentence2 << '\n';
  }
}

}  // namespace sentprobe
