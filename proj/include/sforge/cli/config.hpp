#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sforge/embed/embedding.hpp"
#include "sforge/embed/subword.hpp"
#include "sforge/eval/split.hpp"
#include "sforge/models/spec.hpp"
#include "sforge/textprep/filter.hpp"
#include "sforge/textprep/tokenize.hpp"

namespace sforge {

struct RunPaths {
  std::string corpus;      // labeled TSV
  std::string unlabeled;   // one text per line, for embeddings
  std::string embeddings;  // vector text file
  std::string checkpoint;
  std::string report;
};

struct EvalSettings {
  SplitRatio holdout;
  std::size_t k = 10;
  bool stratified = true;
};

struct RunConfig {
  std::uint64_t seed = 1;
  bool deterministic = true;
  std::size_t jobs = 1;
  RunPaths paths;
  PunctuationPolicy policy = PunctuationPolicy::StripExceptQuestion;
  QuestionMode question_mode = QuestionMode::Detached;
  std::size_t vocab_min_count = 1;
  EmbeddingConfig embed;
  std::vector<std::size_t> sweep_dims;
  std::vector<EmbeddingMode> sweep_modes;
  ModelSpec model = model_preset("lstm");
  std::size_t epochs = 10;
  EvalSettings eval;
};

namespace detail {

inline SplitRatio parse_ratio(std::string_view s) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) fail(ErrorKind::Config, "holdout ratio must look like 4:1, got '", s, "'");
  SplitRatio r{parse_size(s.substr(0, colon)), parse_size(s.substr(colon + 1))};
  if (r.train < 1 || r.val < 1) fail(ErrorKind::Config, "holdout ratio parts must be positive");
  return r;
}

inline std::vector<EmbeddingMode> parse_modes(std::string_view s) {
  std::vector<EmbeddingMode> out;
  std::string item;
  std::istringstream in{std::string(s)};
  while (std::getline(in, item, ',')) out.push_back(parse_embedding_mode(trim(item)));
  return out;
}

}  // namespace detail

// Flat `key = value` lines; '#' starts a comment. Keys are dotted by
// section. model.name is applied first, whatever its position.
// Lines past `file_lines` came from the command line and are reported as such.
inline RunConfig parse_run_config(std::string_view text, const std::string& origin = "<config>",
                                  std::size_t file_lines = std::string::npos) {
  using namespace detail;
  std::vector<std::pair<std::string, std::string>> items;
  std::vector<std::size_t> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, origin, ":", lineno, ": expected 'key = value'");
    items.emplace_back(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
    lines.push_back(lineno);
  }

  RunConfig c;
  for (const auto& [k, v] : items) {
    if (k == "model.name") c.model = model_preset(v);
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& [key, value] = items[i];
    try {
      if (key == "model.name") continue;
      if (key == "seed") c.seed = parse_size(value);
      else if (key == "deterministic") c.deterministic = parse_bool(value);
      else if (key == "jobs") c.jobs = parse_size(value);
      else if (key == "epochs" || key == "train.epochs") c.epochs = parse_size(value);
      else if (key == "paths.corpus") c.paths.corpus = value;
      else if (key == "paths.unlabeled") c.paths.unlabeled = value;
      else if (key == "paths.embeddings") c.paths.embeddings = value;
      else if (key == "paths.checkpoint") c.paths.checkpoint = value;
      else if (key == "paths.report") c.paths.report = value;
      else if (key == "prep.policy") c.policy = parse_policy(value);
      else if (key == "prep.question_mode") c.question_mode = parse_question_mode(value);
      else if (key == "prep.min_count") c.vocab_min_count = parse_size(value);
      else if (key == "prep.max_len") c.model.max_len = parse_size(value);
      else if (key == "embed.dim") c.embed.dim = parse_size(value);
      else if (key == "embed.window") c.embed.window = parse_size(value);
      else if (key == "embed.min_count") c.embed.min_count = parse_size(value);
      else if (key == "embed.workers") c.embed.workers = parse_size(value);
      else if (key == "embed.downsample") c.embed.downsample_t = parse_real(value);
      else if (key == "embed.negatives") c.embed.negatives = parse_size(value);
      else if (key == "embed.epochs") c.embed.epochs = parse_size(value);
      else if (key == "embed.mode") c.embed.mode = parse_embedding_mode(value);
      else if (key == "embed.ngram_min") c.embed.ngram_min = parse_size(value);
      else if (key == "embed.ngram_max") c.embed.ngram_max = parse_size(value);
      else if (key == "embed.buckets") c.embed.bucket_count = parse_size(value);
      else if (key == "embed.lr") c.embed.learning_rate = parse_real(value);
      else if (key == "embed.sweep") c.sweep_dims = parse_sizes(value);
      else if (key == "embed.sweep_modes") c.sweep_modes = parse_modes(value);
      else if (key == "eval.holdout") c.eval.holdout = parse_ratio(value);
      else if (key == "eval.k") c.eval.k = parse_size(value);
      else if (key == "eval.stratified") c.eval.stratified = parse_bool(value);
      else if (key.rfind("model.", 0) == 0) apply_model_setting(c.model, std::string_view(key).substr(6), value);
      else fail(ErrorKind::Config, "unknown key '", key, "'");
    } catch (const Error& e) {
      if (lines[i] > file_lines) fail(ErrorKind::Config, "-s ", key, ": ", e.detail());
      fail(ErrorKind::Config, origin, ":", lines[i], ": ", e.detail());
    }
  }
  if (c.deterministic) {
    c.jobs = 1;
    c.embed.workers = 1;
  }
  if (c.jobs < 1) fail(ErrorKind::Config, "jobs must be >= 1");
  if (c.epochs < 1) fail(ErrorKind::Config, "epochs must be >= 1");
  if (c.eval.k < 2) fail(ErrorKind::Config, "eval.k must be >= 2");
  c.embed.validate();
  c.model.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot read config '", path, "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

// Canonical rendering; its hash identifies a run in reports.
inline std::string to_text(const RunConfig& c) {
  using namespace detail;
  std::ostringstream o;
  o << "seed = " << c.seed << '\n'
    << "deterministic = " << (c.deterministic ? "true" : "false") << '\n'
    << "jobs = " << c.jobs << '\n'
    << "epochs = " << c.epochs << '\n'
    << "paths.corpus = " << c.paths.corpus << '\n'
    << "paths.unlabeled = " << c.paths.unlabeled << '\n'
    << "paths.embeddings = " << c.paths.embeddings << '\n'
    << "paths.checkpoint = " << c.paths.checkpoint << '\n'
    << "paths.report = " << c.paths.report << '\n'
    << "prep.policy = " << to_string(c.policy) << '\n'
    << "prep.question_mode = " << to_string(c.question_mode) << '\n'
    << "prep.min_count = " << c.vocab_min_count << '\n'
    << "embed.dim = " << c.embed.dim << '\n'
    << "embed.window = " << c.embed.window << '\n'
    << "embed.min_count = " << c.embed.min_count << '\n'
    << "embed.workers = " << c.embed.workers << '\n'
    << "embed.downsample = " << fmt_real(c.embed.downsample_t) << '\n'
    << "embed.negatives = " << c.embed.negatives << '\n'
    << "embed.epochs = " << c.embed.epochs << '\n'
    << "embed.mode = " << to_string(c.embed.mode) << '\n'
    << "embed.ngram_min = " << c.embed.ngram_min << '\n'
    << "embed.ngram_max = " << c.embed.ngram_max << '\n'
    << "embed.buckets = " << c.embed.bucket_count << '\n'
    << "embed.lr = " << fmt_real(c.embed.learning_rate) << '\n';
  if (!c.sweep_dims.empty()) o << "embed.sweep = " << join_sizes(c.sweep_dims) << '\n';
  if (!c.sweep_modes.empty()) {
    o << "embed.sweep_modes =";
    for (std::size_t i = 0; i < c.sweep_modes.size(); ++i) o << (i ? "," : " ") << to_string(c.sweep_modes[i]);
    o << '\n';
  }
  o << "eval.holdout = " << c.eval.holdout.train << ':' << c.eval.holdout.val << '\n'
    << "eval.k = " << c.eval.k << '\n'
    << "eval.stratified = " << (c.eval.stratified ? "true" : "false") << '\n';
  std::istringstream model(to_text(c.model));
  std::string line;
  while (std::getline(model, line)) o << "model." << line << '\n';
  return o.str();
}

// output paths don't change results, so they stay out of the hash
inline std::uint64_t config_hash(RunConfig c) {
  c.paths.checkpoint.clear();
  c.paths.report.clear();
  return fnv1a64(to_text(c));
}

inline void require_file(const std::string& path, const char* key) {
  if (path.empty()) fail(ErrorKind::Config, key, " is not set");
  if (!std::filesystem::is_regular_file(path)) fail(ErrorKind::Data, key, " '", path, "' does not exist");
}

inline void require_output(const std::string& path, const char* key) {
  if (path.empty()) fail(ErrorKind::Config, key, " is not set");
}

}  // namespace sforge
