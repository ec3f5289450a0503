#pragma once

#include <array>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sforge/autograd/checkpoint.hpp"
#include "sforge/cli/config.hpp"
#include "sforge/embed/skipgram.hpp"
#include "sforge/eval/crossval.hpp"
#include "sforge/eval/metrics.hpp"
#include "sforge/eval/report.hpp"
#include "sforge/models/train.hpp"
#include "sforge/textprep/corpus.hpp"

namespace sforge {

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config:
    case ErrorKind::Dimension: return 2;
    case ErrorKind::Training: return 4;
    default: return 3;
  }
}

struct PrepStats {
  std::size_t docs_in = 0;
  std::size_t docs_out = 0;
  std::size_t empty_dropped = 0;
  std::size_t chars_removed = 0;
};

struct TokenizedDoc {
  Label label = Label::Neutral;
  std::vector<std::string> tokens;
};

struct DatasetManifest {
  std::size_t total = 0;
  std::array<std::size_t, kNumClasses> per_class{};
  std::size_t tokens = 0;
};

inline DatasetManifest manifest_of(const std::vector<TokenizedDoc>& docs) {
  DatasetManifest m;
  for (const auto& d : docs) {
    ++m.total;
    ++m.per_class[index_of(d.label)];
    m.tokens += d.tokens.size();
  }
  return m;
}

inline std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream o;
  o << "[manifest]\n"
    << "total = " << m.total << '\n';
  for (auto l : kAllLabels) o << "count." << to_string(l) << " = " << m.per_class[index_of(l)] << '\n';
  o << "tokens = " << m.tokens << '\n';
  return o.str();
}

inline std::vector<TokenizedDoc> prepare_labeled(const std::vector<LabeledRecord>& records, PunctuationPolicy policy,
                                                 QuestionMode mode, PrepStats* stats = nullptr) {
  std::vector<TokenizedDoc> out;
  PrepStats s;
  s.docs_in = records.size();
  for (const auto& r : records) {
    auto clean = filter_chars(r.text, policy, std::to_string(r.line));
    if (!clean) {
      ++s.empty_dropped;
      continue;
    }
    s.chars_removed += clean->chars_removed;
    out.push_back({r.label, tokenize(*clean, mode)});
  }
  s.docs_out = out.size();
  if (stats) *stats = s;
  return out;
}

inline std::vector<std::vector<std::string>> prepare_plain(const std::vector<std::string>& lines,
                                                           PunctuationPolicy policy, QuestionMode mode,
                                                           PrepStats* stats = nullptr) {
  std::vector<std::vector<std::string>> out;
  PrepStats s;
  s.docs_in = lines.size();
  for (const auto& l : lines) {
    auto clean = filter_chars(l, policy);
    if (!clean) {
      ++s.empty_dropped;
      continue;
    }
    s.chars_removed += clean->chars_removed;
    out.push_back(tokenize(*clean, mode));
  }
  s.docs_out = out.size();
  if (stats) *stats = s;
  return out;
}

inline std::string format_stats(const PrepStats& s, PunctuationPolicy policy) {
  std::ostringstream o;
  o << "[preprocess]\n"
    << "policy = " << to_string(policy) << '\n'
    << "docs_in = " << s.docs_in << '\n'
    << "docs_out = " << s.docs_out << '\n'
    << "empty_dropped = " << s.empty_dropped << '\n'
    << "chars_removed = " << s.chars_removed << '\n';
  return o.str();
}

// PAD and OOV rows stay zero; other rows come from the embedding lookup
// (zero for tokens a word2vec file does not know).
inline Tensor embedding_table(const Vocabulary& vocab, const EmbeddingMatrix& vectors) {
  Tensor t({vocab.size(), vectors.dim()});
  for (TokenId id = 2; id < vocab.size(); ++id) {
    const auto v = vectors.vector(vocab.token(id));
    std::copy(v.begin(), v.end(), t.values().begin() + static_cast<std::ptrdiff_t>(id * vectors.dim()));
  }
  return t;
}

inline std::vector<LabeledDocument> encode_docs(const std::vector<TokenizedDoc>& docs, const Vocabulary& vocab,
                                                std::size_t max_len) {
  std::vector<LabeledDocument> out;
  for (const auto& d : docs) {
    LabeledDocument ld;
    ld.token_ids = encode(d.tokens, vocab, max_len);
    ld.label = d.label;
    // a document made only of dropped tokens still needs one id
    if (ld.token_ids[0] == kPadId) ld.token_ids[0] = kOovId;
    out.push_back(std::move(ld));
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot read '", path, "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Data, "cannot write '", path, "'");
  out << text;
  if (!out) fail(ErrorKind::Data, "failed writing '", path, "'");
}

// Emits a report to paths.report when set, else to `out`.
inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) out << text;
  else write_text_file(path, text);
}

// Everything a run needs from the labeled corpus and the vector file.
struct PreparedData {
  Vocabulary vocab = Vocabulary::from_tokens({});
  Tensor table;
  std::vector<LabeledDocument> docs;
  ModelSpec spec;
};

inline PreparedData prepare_run(const RunConfig& cfg) {
  require_file(cfg.paths.corpus, "paths.corpus");
  require_file(cfg.paths.embeddings, "paths.embeddings");
  auto vectors = EmbeddingMatrix::load_text(cfg.paths.embeddings);
  if (vectors.dim() != cfg.model.embedding_dim) {
    fail(ErrorKind::Config, "embeddings '", cfg.paths.embeddings, "' have dim ", vectors.dim(),
         " but model.embedding_dim is ", cfg.model.embedding_dim);
  }
  const auto records = read_labeled_file(cfg.paths.corpus);
  const auto tokenized = prepare_labeled(records, cfg.policy, cfg.question_mode);
  if (tokenized.empty()) fail(ErrorKind::Data, "'", cfg.paths.corpus, "' has no usable documents");
  std::vector<std::vector<std::string>> token_lists;
  for (const auto& d : tokenized) token_lists.push_back(d.tokens);
  PreparedData p;
  p.vocab = Vocabulary::build(token_lists, cfg.vocab_min_count);
  p.table = embedding_table(p.vocab, vectors);
  p.docs = encode_docs(tokenized, p.vocab, cfg.model.max_len);
  p.spec = cfg.model;
  if (p.spec.variant == Variant::Hahnn && !p.spec.sentence_break_id && cfg.question_mode == QuestionMode::Detached &&
      p.vocab.contains("?")) {
    p.spec.sentence_break_id = p.vocab.id("?");
  }
  return p;
}

inline std::string vocab_text(const Vocabulary& v) {
  std::string s;
  const auto toks = v.stored_tokens();
  const auto counts = v.stored_counts();
  for (std::size_t i = 0; i < toks.size(); ++i) s += toks[i] + '\t' + std::to_string(counts[i]) + '\n';
  return s;
}

inline Vocabulary vocab_from_text(const std::string& text) {
  std::vector<std::string> toks;
  std::vector<std::size_t> counts;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) fail(ErrorKind::Parse, "bad vocabulary line in checkpoint");
    toks.push_back(line.substr(0, tab));
    counts.push_back(detail::parse_size(line.substr(tab + 1)));
  }
  return Vocabulary::from_tokens(toks, counts);
}

inline ReproBlock repro_for(const RunConfig& cfg) { return {cfg.seed, config_hash(cfg), cfg.deterministic}; }

// ---- preprocess ----

inline int cmd_preprocess(const std::string& in_path, const std::string& out_path, PunctuationPolicy policy,
                          QuestionMode mode, bool labeled, std::ostream& out) {
  PrepStats stats;
  std::string cleaned, manifest;
  if (labeled) {
    const auto records = read_labeled_file(in_path);
    if (records.empty()) fail(ErrorKind::Data, "'", in_path, "' is empty");
    const auto docs = prepare_labeled(records, policy, mode, &stats);
    manifest = format_manifest(manifest_of(docs));
    for (const auto& d : docs) {
      cleaned += to_string(d.label);
      cleaned += '\t';
      for (std::size_t i = 0; i < d.tokens.size(); ++i) cleaned += (i ? " " : "") + d.tokens[i];
      cleaned += '\n';
    }
  } else {
    const auto lines = read_lines_file(in_path);
    if (lines.empty()) fail(ErrorKind::Data, "'", in_path, "' is empty");
    for (const auto& toks : prepare_plain(lines, policy, mode, &stats)) {
      for (std::size_t i = 0; i < toks.size(); ++i) cleaned += (i ? " " : "") + toks[i];
      cleaned += '\n';
    }
  }
  write_text_file(out_path, cleaned);
  out << format_stats(stats, policy) << manifest;
  return 0;
}

// ---- embed ----

inline EmbeddingTraining train_from_lines(const RunConfig& cfg, const EmbeddingConfig& ec) {
  require_file(cfg.paths.unlabeled, "paths.unlabeled");
  const auto lines = read_lines_file(cfg.paths.unlabeled);
  if (lines.empty()) fail(ErrorKind::Data, "'", cfg.paths.unlabeled, "' is empty");
  return train_embeddings(prepare_plain(lines, cfg.policy, cfg.question_mode), ec, cfg.seed);
}

inline double holdout_accuracy(const RunConfig& cfg, const PreparedData& data) {
  auto [train, val] = holdout_split(std::span<const LabeledDocument>(data.docs), cfg.eval.holdout, cfg.seed);
  Classifier model(data.spec, data.table.clone(), cfg.seed);
  TrainOptions opt;
  opt.epochs = cfg.epochs;
  opt.seed = cfg.seed + 1;
  train_model(model, train, val, opt);
  return evaluate(model, val).accuracy;
}

inline int cmd_embed(const RunConfig& cfg, std::ostream& out) {
  require_output(cfg.paths.embeddings, "paths.embeddings");
  if (cfg.sweep_dims.empty()) {
    auto res = train_from_lines(cfg, cfg.embed);
    res.matrix.save_text(cfg.paths.embeddings);
    std::ostringstream o;
    o << "[embed]\n"
      << "mode = " << to_string(cfg.embed.mode) << '\n'
      << "dim = " << cfg.embed.dim << '\n'
      << "vocabulary = " << res.matrix.vocab().size() - 2 << '\n'
      << "final_loss = " << fixed4(res.epoch_loss.back()) << '\n'
      << "output = " << cfg.paths.embeddings << '\n'
      << repro_block(repro_for(cfg));
    emit(cfg.paths.report, o.str(), out);
    return 0;
  }

  const auto modes = cfg.sweep_modes.empty() ? std::vector<EmbeddingMode>{cfg.embed.mode} : cfg.sweep_modes;
  const bool score = !cfg.paths.corpus.empty();
  std::ostringstream table, keys;
  table << std::left << std::setw(12) << "dimension";
  for (auto m : {EmbeddingMode::Word2Vec, EmbeddingMode::FastText})
    table << std::setw(18) << (std::string(cfg.model.name()) + "-" + to_string(m));
  table << '\n';
  keys << "[sweep]\n";
  for (auto dim : cfg.sweep_dims) {
    table << std::left << std::setw(12) << dim;
    for (auto m : {EmbeddingMode::Word2Vec, EmbeddingMode::FastText}) {
      if (std::find(modes.begin(), modes.end(), m) == modes.end()) {
        table << std::setw(18) << "-";
        continue;
      }
      EmbeddingConfig ec = cfg.embed;
      ec.dim = dim;
      ec.mode = m;
      const std::string path = cfg.paths.embeddings + "." + to_string(m) + "." + std::to_string(dim);
      train_from_lines(cfg, ec).matrix.save_text(path);
      keys << "file." << to_string(m) << '.' << dim << " = " << path << '\n';
      if (score) {
        RunConfig run = cfg;
        run.paths.embeddings = path;
        run.model.embedding_dim = dim;
        const double acc = holdout_accuracy(run, prepare_run(run));
        table << std::setw(18) << fixed4(100.0 * acc);
        keys << "accuracy." << to_string(m) << '.' << dim << " = " << fixed4(acc) << '\n';
      } else {
        table << std::setw(18) << "-";
      }
    }
    table << '\n';
  }
  emit(cfg.paths.report, table.str() + '\n' + keys.str() + repro_block(repro_for(cfg)), out);
  return 0;
}

// ---- train / cv / eval ----

inline void save_run_checkpoint(const std::string& path, const Classifier& model, const Vocabulary& vocab,
                                const RunConfig& cfg, const OptimizerState* optimizer = nullptr) {
  Checkpoint ck;
  model.save(ck);
  if (optimizer) store_optimizer(ck, *optimizer);
  ck.put_text("vocab", vocab_text(vocab));
  std::ostringstream prep;
  prep << "policy = " << to_string(cfg.policy) << '\n' << "question_mode = " << to_string(cfg.question_mode) << '\n';
  ck.put_text("prep", prep.str());
  ck.put_text("run", to_text(cfg));
  ck.save(path);
}

struct LoadedRun {
  Classifier model;
  Vocabulary vocab;
  PunctuationPolicy policy;
  QuestionMode question_mode;
  RunConfig config;
};

inline LoadedRun load_run_checkpoint(const std::string& path) {
  const auto ck = Checkpoint::load(path);
  std::istringstream in(ck.text("prep"));
  std::string line;
  auto policy = PunctuationPolicy::StripExceptQuestion;
  auto mode = QuestionMode::Detached;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    if (key == "policy") policy = parse_policy(value);
    else if (key == "question_mode") mode = parse_question_mode(value);
  }
  RunConfig cfg = parse_run_config(ck.text("run"), path + ":run");
  return {Classifier::load(ck), vocab_from_text(ck.text("vocab")), policy, mode, cfg};
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  require_output(cfg.paths.checkpoint, "paths.checkpoint");
  const auto data = prepare_run(cfg);
  auto [train, val] = holdout_split(std::span<const LabeledDocument>(data.docs), cfg.eval.holdout, cfg.seed);
  Classifier model(data.spec, data.table, cfg.seed);
  TrainOptions opt;
  opt.epochs = cfg.epochs;
  opt.seed = cfg.seed + 1;
  opt.log = [&](std::size_t epoch, const EpochStats& s) {
    log << "epoch " << epoch << " train_loss " << fixed4(s.train_loss) << " train_acc " << fixed4(s.train_accuracy)
        << " val_loss " << fixed4(s.val_loss) << " val_acc " << fixed4(s.val_accuracy) << '\n';
  };
  const auto history = train_model(model, train, val, opt);
  save_run_checkpoint(cfg.paths.checkpoint, model, data.vocab, cfg, &history.optimizer);
  const auto ev = evaluate(model, val);
  std::vector<Label> actual;
  for (const auto& d : val) actual.push_back(d.label);
  const auto cm = confusion(ev.predictions, actual);
  emit(cfg.paths.report, single_report(weighted_metrics(cm), cm, repro_for(cfg)), out);
  return 0;
}

inline int cmd_cv(const RunConfig& cfg, std::ostream& out) {
  const auto data = prepare_run(cfg);
  CvOptions opt;
  opt.k = cfg.eval.k;
  opt.stratified = cfg.eval.stratified;
  opt.seed = cfg.seed;
  opt.epochs = cfg.epochs;
  opt.jobs = cfg.deterministic ? 1 : cfg.jobs;
  const auto result = cross_validate(data.spec, data.table, data.docs, opt);
  emit(cfg.paths.report, cv_report(result, repro_for(cfg)), out);
  return 0;
}

inline int cmd_eval_checkpoint(const std::string& checkpoint, const std::string& data_path, const std::string& report,
                               std::ostream& out) {
  auto run = load_run_checkpoint(checkpoint);
  const auto records = read_labeled_file(data_path);
  const auto docs = encode_docs(prepare_labeled(records, run.policy, run.question_mode), run.vocab,
                                run.model.spec().max_len);
  if (docs.empty()) fail(ErrorKind::Data, "'", data_path, "' has no usable documents");
  const auto ev = evaluate(run.model, docs);
  std::vector<Label> actual;
  for (const auto& d : docs) actual.push_back(d.label);
  const auto cm = confusion(ev.predictions, actual);
  emit(report, single_report(weighted_metrics(cm), cm, repro_for(run.config)), out);
  return 0;
}

// Scores a file of `ACTUAL<TAB>PREDICTED` lines.
inline int cmd_eval_predictions(const std::string& path, const std::string& report, std::ostream& out) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<Label> actual, predicted;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    try {
      if (tab == std::string::npos) fail(ErrorKind::Label, "expected ACTUAL<TAB>PREDICTED");
      actual.push_back(parse_label(line.substr(0, tab)));
      predicted.push_back(parse_label(line.substr(tab + 1)));
    } catch (const Error& e) {
      fail(ErrorKind::Label, path, ":", lineno, ": ", e.detail());
    }
  }
  const auto cm = confusion(predicted, actual);
  emit(report, single_report(weighted_metrics(cm), cm, {0, fnv1a64(text), true}), out);
  return 0;
}

// ---- kappa / predict / describe ----

inline int cmd_kappa(const std::string& file_a, const std::string& file_b, std::ostream& out) {
  const auto a = read_label_list_file(file_a);
  const auto b = read_label_list_file(file_b);
  if (a.size() != b.size()) {
    fail(ErrorKind::Input, "'", file_a, "' has ", a.size(), " labels but '", file_b, "' has ", b.size());
  }
  const auto k = cohens_kappa(a, b);
  out << "[kappa]\n"
      << "items = " << k.items << '\n'
      << "observed_agreement = " << fixed4(k.observed) << '\n'
      << "expected_agreement = " << fixed4(k.expected) << '\n'
      << "kappa = " << (k.kappa ? fixed4(*k.kappa) : std::string("undefined")) << '\n';
  return k.kappa ? 0 : exit_code(ErrorKind::Metrics);
}

inline int cmd_predict(const std::string& checkpoint, const std::vector<std::string>& texts, std::ostream& out) {
  auto run = load_run_checkpoint(checkpoint);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto clean = filter_chars(texts[i], run.policy);
    if (!clean) fail(ErrorKind::Data, "input ", i + 1, " is empty after filtering with policy ", to_string(run.policy));
    auto ids = encode(tokenize(*clean, run.question_mode), run.vocab, run.model.spec().max_len);
    if (ids[0] == kPadId) ids[0] = kOovId;
    const auto scores = run.model.scores(ids);
    const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    if (i) out << '\n';
    out << "label = " << to_string(label_from_index(best)) << '\n';
    for (auto l : kAllLabels) {
      out << "score." << to_string(l) << " = " << std::fixed << std::setprecision(6) << scores[index_of(l)] << '\n';
    }
  }
  return 0;
}

inline int cmd_describe(const ModelSpec& spec, std::size_t vocab_size, std::ostream& out) {
  Classifier model(spec, Tensor({vocab_size, spec.embedding_dim}), 1);
  out << model.describe();
  return 0;
}

}  // namespace sforge
