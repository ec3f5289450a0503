#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sforge/embed/subword.hpp"
#include "sforge/textprep/vocab.hpp"

namespace sforge {

enum class EmbeddingMode { Word2Vec, FastText };

inline const char* to_string(EmbeddingMode m) { return m == EmbeddingMode::Word2Vec ? "word2vec" : "fasttext"; }

inline EmbeddingMode parse_embedding_mode(std::string_view s) {
  if (s == "word2vec") return EmbeddingMode::Word2Vec;
  if (s == "fasttext") return EmbeddingMode::FastText;
  fail(ErrorKind::Config, "unknown embedding mode '", s, "' (expected word2vec|fasttext)");
}

struct EmbeddingConfig {
  std::size_t dim = 300;
  std::size_t window = 5;
  std::size_t min_count = 1;
  std::size_t workers = 1;
  double downsample_t = 0.001;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  EmbeddingMode mode = EmbeddingMode::FastText;
  std::size_t ngram_min = 3;
  std::size_t ngram_max = 6;
  std::uint64_t bucket_count = 200000;
  double learning_rate = 0.025;

  void validate() const {
    if (dim < 1) fail(ErrorKind::Config, "embed.dim must be >= 1");
    if (window < 1) fail(ErrorKind::Config, "embed.window must be >= 1");
    if (min_count < 1) fail(ErrorKind::Config, "embed.min_count must be >= 1");
    if (workers < 1) fail(ErrorKind::Config, "embed.workers must be >= 1");
    if (!(downsample_t > 0)) fail(ErrorKind::Config, "embed.downsample must be > 0");
    if (epochs < 1) fail(ErrorKind::Config, "embed.epochs must be >= 1");
    if (!(learning_rate > 0)) fail(ErrorKind::Config, "embed.lr must be > 0");
    if (mode == EmbeddingMode::FastText) {
      if (ngram_min < 1 || ngram_min > ngram_max) fail(ErrorKind::Config, "embed.ngram_min must be <= embed.ngram_max");
      if (bucket_count < 1) fail(ErrorKind::Config, "embed.buckets must be >= 1");
    }
  }
};

// Word vectors plus, in fastText mode, the hashed subword vectors. Subword
// rows are materialized only for buckets the training corpus touched;
// untouched buckets read as zero.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(Vocabulary vocab, std::size_t dim, EmbeddingMode mode, std::size_t ngram_min = 3,
                  std::size_t ngram_max = 6, std::uint64_t bucket_count = 200000)
      : vocab_(std::move(vocab)),
        dim_(dim),
        mode_(mode),
        ngram_min_(ngram_min),
        ngram_max_(ngram_max),
        bucket_count_(bucket_count),
        words_(vocab_.size() * dim, 0.0) {}

  const Vocabulary& vocab() const { return vocab_; }
  std::size_t dim() const { return dim_; }
  EmbeddingMode mode() const { return mode_; }
  std::uint64_t bucket_count() const { return bucket_count_; }
  std::size_t ngram_min() const { return ngram_min_; }
  std::size_t ngram_max() const { return ngram_max_; }

  double* word_row(TokenId id) { return &words_[id * dim_]; }
  const double* word_row(TokenId id) const { return &words_[id * dim_]; }

  std::size_t subword_row_count() const { return bucket_rows_.size(); }

  // Row index for a bucket, allocating it if needed.
  std::size_t ensure_bucket(std::uint64_t bucket) {
    auto [it, inserted] = bucket_rows_.emplace(bucket, subwords_.size() / dim_);
    if (inserted) subwords_.resize(subwords_.size() + dim_, 0.0);
    return it->second;
  }

  const double* bucket_row(std::uint64_t bucket) const {
    auto it = bucket_rows_.find(bucket);
    return it == bucket_rows_.end() ? nullptr : &subwords_[it->second * dim_];
  }

  double* subword_row(std::size_t row) { return &subwords_[row * dim_]; }

  std::vector<std::uint64_t> buckets_for(std::string_view token) const {
    std::vector<std::uint64_t> out;
    for (const auto& g : subword_ngrams(token, ngram_min_, ngram_max_)) out.push_back(subword_bucket(g, bucket_count_));
    return out;
  }

  // Lookup vector. word2vec: the word row, or zero when unknown. fastText:
  // mean of the word row and its subword rows, or for unknown tokens the
  // mean of the subword rows alone.
  std::vector<double> vector(std::string_view token) const {
    std::vector<double> out(dim_, 0.0);
    const bool known = vocab_.contains(token);
    if (mode_ == EmbeddingMode::Word2Vec) {
      if (known) {
        const double* r = word_row(vocab_.id(token));
        out.assign(r, r + dim_);
      }
      return out;
    }
    std::size_t parts = 0;
    if (known) {
      const double* r = word_row(vocab_.id(token));
      for (std::size_t j = 0; j < dim_; ++j) out[j] += r[j];
      ++parts;
    }
    for (auto b : buckets_for(token)) {
      if (const double* r = bucket_row(b)) {
        for (std::size_t j = 0; j < dim_; ++j) out[j] += r[j];
      }
      ++parts;
    }
    for (double& v : out) v /= static_cast<double>(parts);
    return out;
  }

  void save_text(std::ostream& out) const {
    out << vocab_.size() - 2 << ' ' << dim_ << '\n';
    out << std::setprecision(9);
    for (TokenId id = 2; id < vocab_.size(); ++id) {
      out << vocab_.token(id);
      for (double v : vector(vocab_.token(id))) out << ' ' << v;
      out << '\n';
    }
  }

  void save_text(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Data, "cannot write '", path, "'");
    save_text(out);
  }

  // Text vectors load as a plain word table (word2vec lookup semantics).
  static EmbeddingMatrix load_text(std::istream& in, const std::string& origin = "<input>") {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Parse, origin, ":1: empty vector file");
    std::istringstream head(line);
    std::size_t count = 0, dim = 0;
    std::string extra;
    if (!(head >> count >> dim) || (head >> extra) || dim == 0) {
      fail(ErrorKind::Parse, origin, ":1: header must be 'V dim'");
    }
    std::vector<std::string> tokens;
    std::vector<double> values;
    values.reserve(count * dim);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string tok;
      row >> tok;
      for (std::size_t j = 0; j < dim; ++j) {
        double v = 0.0;
        if (!(row >> v)) fail(ErrorKind::Parse, origin, ":", lineno, ": expected ", dim, " values for '", tok, "'");
        values.push_back(v);
      }
      if (row >> extra) fail(ErrorKind::Parse, origin, ":", lineno, ": more than ", dim, " values");
      tokens.push_back(tok);
    }
    if (tokens.size() != count) {
      fail(ErrorKind::Parse, origin, ":", lineno, ": header declares ", count, " rows, found ", tokens.size());
    }
    EmbeddingMatrix m(Vocabulary::from_tokens(tokens), dim, EmbeddingMode::Word2Vec);
    std::copy(values.begin(), values.end(), m.words_.begin() + static_cast<std::ptrdiff_t>(2 * dim));
    return m;
  }

  static EmbeddingMatrix load_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Data, "cannot read '", path, "'");
    return load_text(in, path);
  }

  bool all_finite() const {
    for (double v : words_)
      if (!std::isfinite(v)) return false;
    for (double v : subwords_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::vector<double>& word_storage() { return words_; }
  const std::vector<double>& word_storage() const { return words_; }
  const std::vector<double>& subword_storage() const { return subwords_; }

 private:
  Vocabulary vocab_;
  std::size_t dim_;
  EmbeddingMode mode_;
  std::size_t ngram_min_;
  std::size_t ngram_max_;
  std::uint64_t bucket_count_;
  std::vector<double> words_;
  std::vector<double> subwords_;
  std::unordered_map<std::uint64_t, std::size_t> bucket_rows_;
};

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace sforge
