#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sforge/error.hpp"
#include "sforge/textprep/filter.hpp"

namespace sforge {

// Whether '?' stays glued to the preceding word or becomes its own token.
enum class QuestionMode { Attached, Detached };

inline const char* to_string(QuestionMode m) { return m == QuestionMode::Attached ? "attached" : "detached"; }

inline QuestionMode parse_question_mode(std::string_view s) {
  if (s == "attached") return QuestionMode::Attached;
  if (s == "detached") return QuestionMode::Detached;
  fail(ErrorKind::Config, "unknown question mode '", s, "' (expected attached|detached)");
}

inline std::vector<std::string> tokenize(std::string_view text, QuestionMode mode = QuestionMode::Detached) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    if (ch == ' ') {
      flush();
    } else if (ch == '?' && mode == QuestionMode::Detached) {
      flush();
      tokens.emplace_back("?");
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return tokens;
}

inline std::vector<std::string> tokenize(const CleanComment& c, QuestionMode mode = QuestionMode::Detached) {
  return tokenize(c.text, mode);
}

}  // namespace sforge
