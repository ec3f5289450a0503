#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace sforge {

enum class ErrorKind {
  Dimension,
  Config,
  Label,
  Data,
  Parse,
  Training,
  Vocabulary,
  Split,
  Metrics,
  Input,
  SequenceTooShort,
  EmptySequence,
  Pooling,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Label: return "label error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Vocabulary: return "vocabulary error";
    case ErrorKind::Split: return "split error";
    case ErrorKind::Metrics: return "metrics error";
    case ErrorKind::Input: return "input error";
    case ErrorKind::SequenceTooShort: return "sequence-too-short error";
    case ErrorKind::EmptySequence: return "empty-sequence error";
    case ErrorKind::Pooling: return "pooling error";
  }
  return "error";
}

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // message without the kind prefix, for rethrowing with more context
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

template <typename... Args>
[[noreturn]] void fail(ErrorKind kind, Args&&... args) {
  throw Error(kind, detail::concat(std::forward<Args>(args)...));
}

}  // namespace sforge
