#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "sforge/embed/embedding.hpp"
#include "sforge/embed/skipgram.hpp"
#include "sforge/embed/subword.hpp"
#include "cooc.hpp"

using namespace sforge;

namespace {

using sforge::testing::cooccurrence_corpus;
using sforge::testing::small_config;

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sforge_embed_" + name);
}

}  // namespace

TEST(Subword, NgramsOfAbc) {
  EXPECT_EQ(subword_ngrams("abc", 3, 6),
            (std::vector<std::string>{"<ab", "abc", "bc>", "<abc", "abc>", "<abc>"}));
  EXPECT_EQ(subword_ngrams("a", 3, 6), (std::vector<std::string>{"<a>"}));
}

TEST(Subword, CountFormula) {
  // distinct n-grams of "<w>" for n in [3,6], plus the whole wrapped token
  for (std::string w : {"abcd", "abcdefgh", "කාගිම"}) {
    const std::size_t len = utf8::decode(w).size() + 2;
    std::size_t expect = 0;
    for (std::size_t n = 3; n <= 6 && n <= len; ++n) expect += len - n + 1;
    if (len > 6) ++expect;
    EXPECT_EQ(subword_ngrams(w, 3, 6).size(), expect) << w;
  }
  EXPECT_THROW(subword_ngrams("", 3, 6), Error);
  EXPECT_THROW(subword_ngrams("a", 4, 3), Error);
}

TEST(Subword, HashStable) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_LT(subword_bucket("abc", 17), 17u);
}

TEST(Skipgram, SubsampleKeep) {
  const double t = 1e-3;
  EXPECT_NEAR(subsample_keep(t, t), 1.0, 1e-12);
  EXPECT_NEAR(subsample_keep(100 * t, t), 0.1, 1e-12);
  EXPECT_NEAR(subsample_keep(t / 10, t), 1.0, 1e-12);
  EXPECT_THROW(subsample_keep(0.0, t), Error);
}

TEST(Skipgram, NegativeDistribution) {
  std::vector<std::vector<std::string>> docs;
  const std::map<std::string, int> counts{{"a", 1}, {"b", 10}, {"c", 100}, {"d", 30}};
  for (const auto& [tok, n] : counts) docs.push_back(std::vector<std::string>(n, tok));
  auto v = Vocabulary::build(docs, 1);
  auto w = negative_sampling_weights(v);
  EXPECT_EQ(w[kPadId], 0.0);
  EXPECT_EQ(w[kOovId], 0.0);
  double z = 0;
  for (const auto& [tok, n] : counts) z += std::pow(n, 0.75);
  std::discrete_distribution<std::size_t> noise(w.begin(), w.end());
  Rng rng(3);
  std::vector<std::size_t> hits(v.size(), 0);
  const std::size_t draws = 1000000;
  for (std::size_t i = 0; i < draws; ++i) ++hits[noise(rng)];
  for (const auto& [tok, n] : counts) {
    const double p = std::pow(n, 0.75) / z;
    const double got = static_cast<double>(hits[v.id(tok)]) / draws;
    EXPECT_NEAR(got, p, 0.01 * std::max(p, 0.01)) << tok;
  }
}

TEST(Config, Validate) {
  EmbeddingConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dim = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.ngram_min = 7;
  EXPECT_THROW(c.validate(), Error);
  c.mode = EmbeddingMode::Word2Vec;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(parse_embedding_mode("fasttext"), EmbeddingMode::FastText);
  EXPECT_THROW(parse_embedding_mode("glove"), Error);
}

TEST(Training, SharedContextsCluster) {
  for (auto mode : {EmbeddingMode::Word2Vec, EmbeddingMode::FastText}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto tr = train_embeddings(cooccurrence_corpus(11 + seed), small_config(mode), 7 + seed);
      const auto& m = tr.matrix;
      const double xy = cosine(m.vector("foo"), m.vector("bar"));
      const double xz = cosine(m.vector("foo"), m.vector("qux"));
      EXPECT_GT(xy, 0.5) << to_string(mode) << " seed " << seed;
      EXPECT_LT(xz, 0.5) << to_string(mode) << " seed " << seed;
      EXPECT_TRUE(m.all_finite());
    }
  }
}

TEST(Training, DeterministicSingleWorker) {
  for (auto mode : {EmbeddingMode::Word2Vec, EmbeddingMode::FastText}) {
    auto a = train_embeddings(cooccurrence_corpus(2), small_config(mode), 99);
    auto b = train_embeddings(cooccurrence_corpus(2), small_config(mode), 99);
    EXPECT_TRUE(a.deterministic);
    EXPECT_EQ(a.matrix.word_storage(), b.matrix.word_storage());
    EXPECT_EQ(a.matrix.subword_storage(), b.matrix.subword_storage());
    EXPECT_EQ(a.epoch_loss, b.epoch_loss);
    auto c = train_embeddings(cooccurrence_corpus(2), small_config(mode), 100);
    EXPECT_NE(a.matrix.word_storage(), c.matrix.word_storage());
  }
}

TEST(Training, MultiWorkerFlagged) {
  auto cfg = small_config(EmbeddingMode::Word2Vec);
  cfg.workers = 2;
  auto tr = train_embeddings(cooccurrence_corpus(2), cfg, 1);
  EXPECT_FALSE(tr.deterministic);
  EXPECT_TRUE(tr.matrix.all_finite());
}

TEST(Training, LossDecreases) {
  for (auto mode : {EmbeddingMode::Word2Vec, EmbeddingMode::FastText}) {
    auto tr = train_embeddings(cooccurrence_corpus(4), small_config(mode), 5);
    ASSERT_EQ(tr.epoch_loss.size(), 10u);
    EXPECT_LT(tr.epoch_loss.back(), tr.epoch_loss.front()) << to_string(mode);
  }
}

TEST(Training, EmptyCorpusRejected) {
  EXPECT_THROW(train_embeddings({}, small_config(EmbeddingMode::Word2Vec), 1), Error);
  auto cfg = small_config(EmbeddingMode::Word2Vec);
  cfg.min_count = 50;
  EXPECT_THROW(train_embeddings({{"a", "b"}}, cfg, 1), Error);
}

TEST(Lookup, OutOfVocabulary) {
  auto w2v = train_embeddings(cooccurrence_corpus(1), small_config(EmbeddingMode::Word2Vec), 1).matrix;
  for (double x : w2v.vector("zzzz")) EXPECT_EQ(x, 0.0);
  auto ft = train_embeddings(cooccurrence_corpus(1), small_config(EmbeddingMode::FastText), 1).matrix;
  // "foox" shares "<fo", "foo" with a trained token
  double norm = 0;
  for (double x : ft.vector("foox")) norm += x * x;
  EXPECT_GT(norm, 0.0);
  EXPECT_EQ(ft.vector("foo").size(), 20u);
}

TEST(TextFormat, RoundTrip) {
  auto m = train_embeddings(cooccurrence_corpus(1), small_config(EmbeddingMode::FastText), 1).matrix;
  const auto path = temp_file("rt.vec").string();
  m.save_text(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, std::to_string(m.vocab().size() - 2) + " 20");
  auto back = EmbeddingMatrix::load_text(path);
  EXPECT_EQ(back.dim(), 20u);
  EXPECT_EQ(back.vocab().size(), m.vocab().size());
  for (TokenId id = 2; id < m.vocab().size(); ++id) {
    const auto& tok = m.vocab().token(id);
    auto a = m.vector(tok), b = back.vector(tok);
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-7 * std::max(1.0, std::abs(a[j])));
  }
  std::filesystem::remove(path);
}

TEST(TextFormat, Malformed) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return EmbeddingMatrix::load_text(in, "v.txt");
  };
  auto kind = [&](const std::string& text) -> std::optional<ErrorKind> {
    try {
      parse(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return std::nullopt;
  };
  EXPECT_EQ(kind("2 3\na 1 2 3\nb 1 2 3\nc 1 2 3\n"), ErrorKind::Parse);
  EXPECT_EQ(kind(""), ErrorKind::Parse);
  EXPECT_EQ(kind("1 3\na 1 2\n"), ErrorKind::Parse);
  EXPECT_EQ(kind("1 2\na 1 2 3\n"), ErrorKind::Parse);
  EXPECT_EQ(kind("x y\n"), ErrorKind::Parse);
  auto ok = parse("1 2\na 0.5 -1\n");
  EXPECT_EQ(ok.vector("a"), (std::vector<double>{0.5, -1}));
  EXPECT_THROW(EmbeddingMatrix::load_text(temp_file("missing").string()), Error);
}
