#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sforge/error.hpp"
#include "sforge/textprep/utf8.hpp"

namespace sforge {

// FNV-1a, 64-bit, over the UTF-8 bytes. Part of the saved-model contract:
// changing it silently remaps every subword bucket.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t subword_bucket(std::string_view ngram, std::uint64_t bucket_count) {
  return fnv1a64(ngram) % bucket_count;
}

// Character n-grams of "<token>" for n in [nmin, nmax], n-major, then the
// whole wrapped token once (unless one of the n-grams already equals it).
// Lengths count code points, not bytes.
inline std::vector<std::string> subword_ngrams(std::string_view token, std::size_t nmin, std::size_t nmax) {
  if (token.empty()) fail(ErrorKind::Input, "subword_ngrams: empty token");
  if (nmin < 1 || nmin > nmax) fail(ErrorKind::Config, "subword_ngrams: invalid range ", nmin, "..", nmax);
  std::vector<char32_t> cps{U'<'};
  auto body = utf8::decode(token);
  cps.insert(cps.end(), body.begin(), body.end());
  cps.push_back(U'>');
  const std::size_t len = cps.size();

  std::vector<std::string> grams;
  for (std::size_t n = nmin; n <= nmax && n <= len; ++n) {
    for (std::size_t start = 0; start + n <= len; ++start) {
      grams.push_back(utf8::encode({cps.begin() + static_cast<std::ptrdiff_t>(start),
                                    cps.begin() + static_cast<std::ptrdiff_t>(start + n)}));
    }
  }
  std::string whole = utf8::encode(cps);
  if (std::find(grams.begin(), grams.end(), whole) == grams.end()) grams.push_back(std::move(whole));
  return grams;
}

}  // namespace sforge
