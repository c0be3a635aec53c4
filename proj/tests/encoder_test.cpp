#include "sentprobe/encoder.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace sentprobe {
namespace {

using Words = std::vector<std::string>;

TEST(BuildVocab, OrderAndMinCount) {
  const auto v = build_vocab({"a b", "a"});
  EXPECT_EQ(v.words(), (Words{"[CLS]", "[UNK]", "a", "b"}));
  EXPECT_EQ(*v.find("a"), 2u);
  EXPECT_EQ(build_vocab({"a b", "a"}, 2).words(), (Words{"[CLS]", "[UNK]", "a"}));
  // equal counts fall back to lexicographic order
  EXPECT_EQ(build_vocab({"z y x", "y"}).words(), (Words{"[CLS]", "[UNK]", "y", "x", "z"}));
  EXPECT_THROW(build_vocab({}), InvalidInput);
  EXPECT_THROW(build_vocab({"a"}, 0), InvalidInput);
}

TEST(BuildVocab, MatchesHashCountOracle) {
  Rng rng(12);
  const Words pool{"red", "green", "blue", "cat", "dog", "runs", "sits", "the", "a", "on"};
  std::vector<std::string> texts;
  std::map<std::string, std::size_t> counts;
  for (int i = 0; i < 100; ++i) {
    std::string s;
    const auto len = 1 + rng.below(8);
    for (std::size_t j = 0; j < len; ++j) {
      const auto& w = pool[rng.below(pool.size())];
      s += w + " ";
      ++counts[w];
    }
    texts.push_back(s);
  }
  for (std::size_t min_count : {1u, 40u, 60u}) {
    const auto v = build_vocab(texts, min_count);
    std::size_t expected = 2;
    for (const auto& [w, c] : counts) {
      if (c >= min_count) {
        ++expected;
        ASSERT_TRUE(v.find(w).has_value()) << w;
      } else {
        EXPECT_FALSE(v.find(w).has_value()) << w;
      }
    }
    EXPECT_EQ(v.size(), expected);
    for (std::size_t i = 3; i < v.size(); ++i) {
      EXPECT_GE(counts[v.word(i - 1)], counts[v.word(i)]);
    }
  }
}

TEST(Vocabulary, IndicesAreDenseAndInjective) {
  const auto v = build_vocab({"one two three two"});
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(*v.find(v.word(i)), i);
  EXPECT_EQ(v.index_or_unk("missing"), Vocabulary::kUnk);
  EXPECT_EQ(v.word(Vocabulary::kCls), "[CLS]");
}

ToyEncoder fixed_encoder(Pooling pooling = Pooling::kMean) {
  // rows: [CLS], [UNK], a, b
  RealMatrix table(4, 2, std::vector<double>{9, 9, -7, -7, 1, 3, 3, 1});
  EncoderOptions opts;
  opts.pooling = pooling;
  return ToyEncoder(Vocabulary(Words{"a", "b"}), table, opts);
}

TEST(EncodeTokens, ClsFirstAndUnknownRows) {
  const auto enc = fixed_encoder();
  const auto one = encode_tokens(enc, {"a"});
  ASSERT_EQ(one.size(), 2u);
  EXPECT_EQ(one[0], (RealVector{9, 9}));
  EXPECT_EQ(one[1], (RealVector{1, 3}));
  const auto unk = encode_tokens(enc, {"zebra"});
  EXPECT_EQ(unk[1], (RealVector{-7, -7}));
  const auto rep = encode_tokens(enc, {"b", "a", "b"});
  ASSERT_EQ(rep.size(), 4u);
  EXPECT_EQ(rep[1], rep[3]);
  EXPECT_THROW(encode_tokens(enc, {}), InvalidInput);
}

TEST(Pool, Examples) {
  const std::vector<RealVector> seq{{100, 100}, {1, 3}, {3, 1}};
  EXPECT_EQ(pool(seq, Pooling::kMean), (RealVector{2, 2}));
  EXPECT_EQ(pool(seq, Pooling::kMax), (RealVector{3, 3}));
  EXPECT_EQ(pool(seq, Pooling::kCls), (RealVector{100, 100}));
  EXPECT_EQ(pool(seq, Pooling::kMean, true), (RealVector{104.0 / 3, 104.0 / 3}));
  EXPECT_THROW(pool({}, Pooling::kMean), InvalidInput);
  EXPECT_THROW(pool({RealVector{1, 2}, RealVector{1, 2, 3}}, Pooling::kMean), InvalidInput);
}

TEST(Pool, Properties) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + rng.below(6);
    const std::size_t n = 2 + rng.below(8);
    std::vector<RealVector> seq;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(d);
      for (auto& x : v) x = rng.uniform(-1, 1);
      seq.emplace_back(v);
    }
    const auto mean = pool(seq, Pooling::kMean);
    const auto mx = pool(seq, Pooling::kMax);
    for (std::size_t j = 0; j < d; ++j) EXPECT_GE(mx[j], mean[j]);

    auto perm = seq;
    std::vector<RealVector> tail(perm.begin() + 1, perm.end());
    rng.shuffle(tail);
    std::copy(tail.begin(), tail.end(), perm.begin() + 1);
    EXPECT_EQ(pool(perm, Pooling::kMax), mx);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(pool(perm, Pooling::kMean)[j], mean[j], 1e-12);

    std::vector<RealVector> same(n, seq[1]);
    const auto m = pool(same, Pooling::kMean);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(m[j], seq[1][j], 1e-15);
  }
  // CLS is position-sensitive
  const std::vector<RealVector> a{{1, 0}, {0, 1}}, b{{0, 1}, {1, 0}};
  EXPECT_NE(pool(a, Pooling::kCls), pool(b, Pooling::kCls));
}

TEST(ToyEncoder, EmbedExamples) {
  const auto enc = fixed_encoder();
  EXPECT_EQ(embed(enc, "a"), (RealVector{1, 3}));
  // (1,3) and (3,1) averaged by hand
  EXPECT_EQ(embed(enc, "a b"), (RealVector{2, 2}));
  EXPECT_EQ(embed(fixed_encoder(Pooling::kMax), "A, b!"), (RealVector{3, 3}));
  EXPECT_EQ(embed(fixed_encoder(Pooling::kCls), "a b"), (RealVector{9, 9}));
  // no words at all: [CLS] [UNK]
  EXPECT_EQ(embed(enc, "..."), (RealVector{-7, -7}));
  EXPECT_EQ(embed(enc, "a b"), embed(enc, "a b"));
}

TEST(ToyEncoder, TruncatesAtMaxLength) {
  EncoderOptions opts;
  opts.max_length = 3;
  const ToyEncoder enc(Vocabulary(Words{"a", "b"}),
                       RealMatrix(4, 2, std::vector<double>{0, 0, 0, 0, 1, 3, 3, 1}), opts);
  EXPECT_EQ(enc.token_ids("a b b b b").size(), 3u);
  EXPECT_EQ(embed(enc, "a b b b b"), (RealVector{2, 2}));
}

TEST(ToyEncoder, RandomInitRange) {
  Rng rng(1);
  const ToyEncoder enc(build_vocab({"a b c"}), 8, rng);
  EXPECT_EQ(enc.dim(), 8u);
  for (double x : enc.table().flat()) {
    EXPECT_LE(std::abs(x), 0.5 / 8);
  }
  Rng rng2(1);
  EXPECT_EQ(enc, ToyEncoder(build_vocab({"a b c"}), 8, rng2));
  Rng rng3(1);
  EXPECT_THROW(ToyEncoder(build_vocab({"a"}), 0, rng3), InvalidInput);
  EXPECT_THROW(ToyEncoder(build_vocab({"a"}), RealMatrix(2, 2)), InvalidInput);
}

TEST(EmbeddingStore, LookupAndErrors) {
  EmbeddingStore store(2);
  store.insert("hello world", RealVector{0.1, -0.2});
  EXPECT_EQ(embed(store, "hello world"), (RealVector{0.1, -0.2}));
  try {
    embed(store, "absent");
    FAIL();
  } catch (const MissingEmbedding& e) {
    EXPECT_NE(std::string(e.what()).find("absent"), std::string::npos);
  }
  EXPECT_THROW(store.insert("hello world", RealVector{1, 1}), InvalidInput);
  EXPECT_THROW(store.insert("x", RealVector{1, 1, 1}), InvalidInput);
  EXPECT_THROW(store.insert("a\tb", RealVector{1, 1}), InvalidInput);
  EXPECT_THROW(store.insert("a\nb", RealVector{1, 1}), InvalidInput);
}

TEST(Dump, RoundTripsBitExactly) {
  Rng rng(99);
  EmbeddingStore store(5);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(5);
    for (auto& x : v) x = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
    store.insert("sentence " + std::to_string(i) + " é", RealVector(v));
  }
  std::stringstream buf;
  write_dump(store, buf);
  const auto back = read_dump(buf);
  ASSERT_EQ(back.size(), store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    EXPECT_EQ(back.keys()[i], store.keys()[i]);
    for (std::size_t j = 0; j < 5; ++j) {
      const double a = store.vector_at(i)[j], b = back.vector_at(i)[j];
      EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
    }
  }
  EXPECT_EQ(back, store);
}

TEST(Dump, FormatAndErrors) {
  EmbeddingStore store(2);
  store.insert("a b", RealVector{0.5, -1});
  std::ostringstream out;
  write_dump(store, out);
  EXPECT_EQ(out.str(), "dim=2\na b\t0.5 -1\n");

  auto error_line = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_dump(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(error_line("dim=3\nx\t1 2 3\ny\t1 2\n"), 3u);
  EXPECT_EQ(error_line("dim=2\nx\t1 2\nx\t3 4\n"), 3u);
  EXPECT_EQ(error_line("d=2\n"), 1u);
  EXPECT_EQ(error_line(""), 1u);
  EXPECT_EQ(error_line("dim=1\nx 1\n"), 2u);
  EXPECT_EQ(error_line("dim=1\nx\tnan\n"), 2u);
}

}  // namespace
}  // namespace sentprobe
