#pragma once

#include <array>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "sforge/error.hpp"
#include "sforge/textprep/filter.hpp"
#include "sforge/textprep/vocab.hpp"

namespace sforge {

inline constexpr std::size_t kNumClasses = 4;

// Class order is fixed everywhere: rows/columns of confusion matrices,
// logits, and report keys all use it.
enum class Label : std::size_t { Negative = 0, Neutral = 1, Positive = 2, Conflict = 3 };

inline constexpr std::array<Label, kNumClasses> kAllLabels{Label::Negative, Label::Neutral, Label::Positive,
                                                          Label::Conflict};

inline const char* to_string(Label l) {
  switch (l) {
    case Label::Negative: return "NEGATIVE";
    case Label::Neutral: return "NEUTRAL";
    case Label::Positive: return "POSITIVE";
    case Label::Conflict: return "CONFLICT";
  }
  return "?";
}

inline std::size_t index_of(Label l) { return static_cast<std::size_t>(l); }

inline Label label_from_index(std::size_t i) {
  if (i >= kNumClasses) fail(ErrorKind::Label, "class index ", i, " outside 0..3");
  return static_cast<Label>(i);
}

inline Label parse_label(std::string_view s) {
  for (Label l : kAllLabels) {
    if (s == to_string(l)) return l;
  }
  fail(ErrorKind::Label, "unknown label '", s, "' (expected NEGATIVE|NEUTRAL|POSITIVE|CONFLICT)");
}

struct LabeledDocument {
  std::vector<TokenId> token_ids;
  Label label = Label::Neutral;
  CleanComment raw;
};

struct LabeledRecord {
  Label label;
  std::string text;
  std::size_t line = 0;
};

namespace detail {

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

// `LABEL<TAB>comment` per line. Blank lines are skipped.
inline std::vector<LabeledRecord> read_labeled(std::istream& in, const std::string& origin = "<input>") {
  std::vector<LabeledRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail(ErrorKind::Label, origin, ":", lineno, ": missing TAB between label and text");
    try {
      out.push_back({parse_label(std::string_view(line).substr(0, tab)), line.substr(tab + 1), lineno});
    } catch (const Error& e) {
      fail(ErrorKind::Label, origin, ":", lineno, ": ", e.detail());
    }
  }
  return out;
}

inline std::vector<LabeledRecord> read_labeled_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Data, "cannot read '", path, "'");
  return read_labeled(in, path);
}

// One comment/article per line, no label column.
inline std::vector<std::string> read_lines_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Data, "cannot read '", path, "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    detail::strip_cr(line);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// One label per line, used for agreement files. Blank lines are skipped.
inline std::vector<Label> read_label_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Data, "cannot read '", path, "'");
  std::vector<Label> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    try {
      out.push_back(parse_label(line));
    } catch (const Error& e) {
      fail(ErrorKind::Label, path, ":", lineno, ": ", e.detail());
    }
  }
  return out;
}

}  // namespace sforge
