#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "sforge/error.hpp"
#include "sforge/textprep/utf8.hpp"

namespace sforge {

enum class PunctuationPolicy { KeepAll, StripAll, StripExceptQuestion };

inline const char* to_string(PunctuationPolicy p) {
  switch (p) {
    case PunctuationPolicy::KeepAll: return "keep-all";
    case PunctuationPolicy::StripAll: return "strip-all";
    case PunctuationPolicy::StripExceptQuestion: return "strip-except-question";
  }
  return "?";
}

inline PunctuationPolicy parse_policy(std::string_view s) {
  if (s == "keep-all") return PunctuationPolicy::KeepAll;
  if (s == "strip-all") return PunctuationPolicy::StripAll;
  if (s == "strip-except-question") return PunctuationPolicy::StripExceptQuestion;
  fail(ErrorKind::Config, "unknown punctuation policy '", s, "' (expected keep-all|strip-all|strip-except-question)");
}

struct CleanComment {
  std::string text;
  std::string source_id;
  std::size_t chars_removed = 0;
};

namespace textprep {

inline constexpr char32_t kZeroWidthJoiner = 0x200D;

inline bool is_sinhala(char32_t cp) { return cp >= 0x0D80 && cp <= 0x0DFF; }
inline bool is_ascii_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

inline bool is_whitespace(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Code points that survive filtering under a policy (space excluded; it is
// handled by whitespace normalization).
inline bool is_allowed(char32_t cp, PunctuationPolicy policy) {
  if (is_sinhala(cp) || cp == kZeroWidthJoiner || is_ascii_digit(cp)) return true;
  switch (policy) {
    case PunctuationPolicy::StripAll: return false;
    case PunctuationPolicy::StripExceptQuestion: return cp == U'?';
    case PunctuationPolicy::KeepAll: return cp == U'?' || cp == U'.' || cp == U',' || cp == U'!';
  }
  return false;
}

}  // namespace textprep

// Keeps the policy's allowed code points. Removed characters and whitespace
// act as separators; the result has single spaces and no leading/trailing
// space. Returns nullopt when nothing survives.
inline std::optional<CleanComment> filter_chars(std::string_view raw, PunctuationPolicy policy,
                                                std::string source_id = {}) {
  CleanComment out;
  out.source_id = std::move(source_id);
  bool pending_space = false;
  for (char32_t cp : utf8::decode(raw)) {
    if (textprep::is_allowed(cp, policy)) {
      if (pending_space && !out.text.empty()) out.text.push_back(' ');
      pending_space = false;
      utf8::append(out.text, cp);
    } else {
      if (!textprep::is_whitespace(cp)) ++out.chars_removed;
      pending_space = true;
    }
  }
  if (out.text.empty()) return std::nullopt;
  return out;
}

}  // namespace sforge
