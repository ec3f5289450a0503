#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sforge/error.hpp"

namespace sforge {

using TokenId = std::size_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kOovId = 1;

// Token <-> id mapping. Ids 0 and 1 are reserved for padding and unknown
// tokens; stored tokens take ids 2.. in descending frequency, ties broken
// lexicographically. Immutable once built.
class Vocabulary {
 public:
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kOovToken = "<oov>";

  static Vocabulary build(const std::vector<std::vector<std::string>>& docs, std::size_t min_count = 1) {
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& doc : docs)
      for (const auto& tok : doc) ++freq[tok];
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, n] : freq) {
      if (n >= min_count) kept.emplace_back(tok, n);
    }
    if (kept.empty()) fail(ErrorKind::Vocabulary, "no token reaches min_count ", min_count);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    Vocabulary v;
    for (auto& [tok, n] : kept) v.insert(tok, n);
    return v;
  }

  // Restores a vocabulary whose stored tokens are listed in id order from 2.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens, const std::vector<std::size_t>& counts = {}) {
    Vocabulary v;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].empty() || v.index_.count(tokens[i])) {
        fail(ErrorKind::Vocabulary, "duplicate or empty token at position ", i);
      }
      v.insert(tokens[i], counts.empty() ? 0 : counts.at(i));
    }
    return v;
  }

  std::size_t size() const { return tokens_.size(); }

  TokenId id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kOovId : it->second;
  }

  bool contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t count(TokenId id) const { return counts_.at(id); }

  // Stored tokens in id order, excluding the reserved entries.
  std::vector<std::string> stored_tokens() const { return {tokens_.begin() + 2, tokens_.end()}; }
  std::vector<std::size_t> stored_counts() const { return {counts_.begin() + 2, counts_.end()}; }

  std::size_t total_count() const {
    std::size_t n = 0;
    for (auto c : counts_) n += c;
    return n;
  }

 private:
  Vocabulary() : tokens_{kPadToken, kOovToken}, counts_{0, 0} {}

  void insert(const std::string& tok, std::size_t n) {
    index_.emplace(tok, tokens_.size());
    tokens_.push_back(tok);
    counts_.push_back(n);
  }

  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
};

// Unknown tokens map to kOovId; long sequences are cut at the tail, short
// ones padded at the tail with kPadId.
inline std::vector<TokenId> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) fail(ErrorKind::Config, "max_len must be >= 1");
  std::vector<TokenId> ids(max_len, kPadId);
  const std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id(tokens[i]);
  return ids;
}

}  // namespace sforge
