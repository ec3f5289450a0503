#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sforge/autograd/optim.hpp"
#include "sforge/autograd/regularize.hpp"
#include "sforge/error.hpp"

namespace sforge {

enum class Variant { Rnn, Lstm, Gru, BiLstm, CnnGru, CnnLstm, CnnBiLstm, StackedLstm, StackedBiLstm, Hahnn, CapsuleA, CapsuleB };

enum class RecurrentKind { Rnn, Lstm, Gru };

inline const char* to_string(RecurrentKind k) {
  switch (k) {
    case RecurrentKind::Rnn: return "rnn";
    case RecurrentKind::Lstm: return "lstm";
    case RecurrentKind::Gru: return "gru";
  }
  return "?";
}

inline RecurrentKind parse_recurrent_kind(std::string_view s) {
  if (s == "rnn") return RecurrentKind::Rnn;
  if (s == "lstm") return RecurrentKind::Lstm;
  if (s == "gru") return RecurrentKind::Gru;
  fail(ErrorKind::Config, "unknown recurrent unit '", s, "' (expected rnn|lstm|gru)");
}

struct ConvSpec {
  std::size_t num_layers = 2;
  std::size_t filters = 64;
  std::vector<std::size_t> kernel_sizes{3, 5};
  std::size_t pool_window = 2;
  std::size_t dilation = 1;
};

struct RoutingConfig {
  std::size_t iterations = 3;
  std::size_t capsule_dim = 16;
  std::size_t capsule_filters = 16;
  std::size_t conv_filters = 32;
  std::vector<std::size_t> grams{3};
  double m_plus = 0.8;
  double m_minus = 0.2;
  double lambda = 0.5;
};

struct AttentionSpec {
  std::size_t word_context_dim = 100;
  std::size_t sentence_context_dim = 100;
  RecurrentKind word_encoder = RecurrentKind::Gru;
  std::vector<std::size_t> conv_filter_sizes{3, 4, 5};
  std::size_t conv_filters = 32;
  // Tokens per sentence chunk; '?' also closes a sentence when
  // ModelSpec::sentence_break_id is set.
  std::size_t sentence_len = 10;
};

// One of the fourteen named classifier configurations plus hyperparameters.
struct ModelSpec {
  Variant variant = Variant::Lstm;
  std::size_t depth = 1;
  std::size_t hidden_units = 100;
  // ReLU dense width for unidirectional heads; time-distributed dense width
  // for bidirectional heads.
  std::size_t dense_units = 64;
  double dropout_p = 0.5;
  std::optional<ConvSpec> conv;
  std::optional<RoutingConfig> routing;
  std::optional<AttentionSpec> attention;
  OptimizerConfig optimizer = OptimizerConfig::adam();
  std::size_t batch_size = 32;
  std::size_t embedding_dim = 300;
  std::size_t max_len = 50;
  bool trainable_embeddings = false;
  double l1 = 0.0;
  double l2 = 0.0;
  int early_stop_patience = 0;
  bool class_weights = false;
  std::optional<std::size_t> sentence_break_id;

  bool is_capsule() const { return variant == Variant::CapsuleA || variant == Variant::CapsuleB; }
  bool is_cnn_hybrid() const {
    return variant == Variant::CnnGru || variant == Variant::CnnLstm || variant == Variant::CnnBiLstm;
  }
  bool is_bidirectional_head() const { return variant == Variant::BiLstm || variant == Variant::StackedBiLstm; }

  RegularizerConfig regularizer() const { return {l1, l2, dropout_p, early_stop_patience}; }

  std::string name() const {
    switch (variant) {
      case Variant::Rnn: return "rnn";
      case Variant::Lstm: return "lstm";
      case Variant::Gru: return "gru";
      case Variant::BiLstm: return "bilstm";
      case Variant::CnnGru: return "cnn-gru";
      case Variant::CnnLstm: return "cnn-lstm";
      case Variant::CnnBiLstm: return "cnn-bilstm";
      case Variant::StackedLstm: return "stacked-lstm-" + std::to_string(depth);
      case Variant::StackedBiLstm: return "stacked-bilstm-" + std::to_string(depth);
      case Variant::Hahnn: return "hahnn";
      case Variant::CapsuleA: return "capsule-a";
      case Variant::CapsuleB: return "capsule-b";
    }
    return "?";
  }

  void validate() const {
    const bool needs_conv = is_cnn_hybrid() || is_capsule();
    if (needs_conv != conv.has_value()) {
      fail(ErrorKind::Config, name(), needs_conv ? " requires a conv section" : " does not take a conv section");
    }
    if (is_capsule() != routing.has_value()) {
      fail(ErrorKind::Config, name(), is_capsule() ? " requires a routing section" : " does not take a routing section");
    }
    if ((variant == Variant::Hahnn) != attention.has_value()) {
      fail(ErrorKind::Config, name(),
           variant == Variant::Hahnn ? " requires an attention section" : " does not take an attention section");
    }
    const bool stacked = variant == Variant::StackedLstm || variant == Variant::StackedBiLstm;
    if (stacked && depth != 2 && depth != 3) fail(ErrorKind::Config, "stacked depth must be 2 or 3, got ", depth);
    if (!stacked && depth != 1) fail(ErrorKind::Config, name(), " has depth 1, got ", depth);
    if (hidden_units < 1 || dense_units < 1) fail(ErrorKind::Config, "hidden/dense units must be >= 1");
    if (!(dropout_p >= 0 && dropout_p < 1)) fail(ErrorKind::Config, "dropout must lie in [0, 1), got ", dropout_p);
    if (batch_size < 1) fail(ErrorKind::Config, "batch size must be >= 1");
    if (embedding_dim < 1 || max_len < 1) fail(ErrorKind::Config, "embedding dim and max_len must be >= 1");
    regularizer().validate();
    optimizer.validate();
    if (conv) {
      if (conv->kernel_sizes.empty()) fail(ErrorKind::Config, "conv kernel sizes must be non-empty");
      if (conv->filters < 1 || conv->pool_window < 1 || conv->dilation < 1) {
        fail(ErrorKind::Config, "conv filters, pool window and dilation must be >= 1");
      }
      for (auto k : conv->kernel_sizes)
        if (k < 1) fail(ErrorKind::Config, "conv kernel sizes must be >= 1");
      if (is_cnn_hybrid() && conv->num_layers != conv->kernel_sizes.size()) {
        fail(ErrorKind::Config, "conv num_layers (", conv->num_layers, ") must equal the number of kernel sizes (",
             conv->kernel_sizes.size(), ")");
      }
    }
    if (routing) {
      if (routing->iterations < 1) fail(ErrorKind::Config, "routing iterations must be >= 1");
      if (routing->capsule_dim < 1 || routing->capsule_filters < 1 || routing->conv_filters < 1) {
        fail(ErrorKind::Config, "capsule sizes must be >= 1");
      }
      const std::vector<std::size_t> expected =
          variant == Variant::CapsuleA ? std::vector<std::size_t>{3} : std::vector<std::size_t>{3, 4, 5};
      if (routing->grams != expected) fail(ErrorKind::Config, name(), " uses grams ", variant == Variant::CapsuleA ? "3" : "3,4,5");
      if (conv->kernel_sizes != routing->grams || conv->filters != routing->conv_filters) {
        fail(ErrorKind::Config, "capsule conv section must match routing grams and conv_filters");
      }
    }
    if (attention) {
      if (attention->word_context_dim < 1 || attention->sentence_context_dim < 1) {
        fail(ErrorKind::Config, "attention context dims must be >= 1");
      }
      if (attention->conv_filter_sizes.empty() || attention->conv_filters < 1) {
        fail(ErrorKind::Config, "attention conv filter sizes must be non-empty");
      }
      const auto widest = *std::max_element(attention->conv_filter_sizes.begin(), attention->conv_filter_sizes.end());
      if (attention->sentence_len < widest) {
        fail(ErrorKind::Config, "sentence length ", attention->sentence_len, " below widest filter ", widest);
      }
    }
  }
};

inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"rnn",           "lstm",           "gru",
                                              "bilstm",        "cnn-gru",        "cnn-lstm",
                                              "cnn-bilstm",    "stacked-lstm-2", "stacked-lstm-3",
                                              "stacked-bilstm-2", "stacked-bilstm-3", "hahnn",
                                              "capsule-a",     "capsule-b"};
  return names;
}

// Hyperparameters for each named configuration. Hidden widths and CNN
// filter counts fall back to the struct defaults.
inline ModelSpec model_preset(std::string_view name) {
  ModelSpec s;
  auto baseline = [&](Variant v) {
    s.variant = v;
    s.optimizer = OptimizerConfig::adadelta(0.95);
    s.dropout_p = 0.5;
  };
  if (name == "rnn") baseline(Variant::Rnn);
  else if (name == "lstm") baseline(Variant::Lstm);
  else if (name == "gru") baseline(Variant::Gru);
  else if (name == "bilstm") s.variant = Variant::BiLstm;
  else if (name == "cnn-gru") s.variant = Variant::CnnGru;
  else if (name == "cnn-lstm") s.variant = Variant::CnnLstm;
  else if (name == "cnn-bilstm") s.variant = Variant::CnnBiLstm;
  else if (name == "stacked-lstm-2" || name == "stacked-lstm-3") {
    s.variant = Variant::StackedLstm;
    s.depth = name.back() == '2' ? 2 : 3;
  } else if (name == "stacked-bilstm-2" || name == "stacked-bilstm-3") {
    s.variant = Variant::StackedBiLstm;
    s.depth = name.back() == '2' ? 2 : 3;
  } else if (name == "hahnn") {
    s.variant = Variant::Hahnn;
    s.optimizer = OptimizerConfig::adam(0.001, 0.0001);
    s.dropout_p = 0.2;
    s.batch_size = 64;
    s.attention = AttentionSpec{};
  } else if (name == "capsule-a" || name == "capsule-b") {
    s.variant = name == "capsule-a" ? Variant::CapsuleA : Variant::CapsuleB;
    s.optimizer = OptimizerConfig::adam(0.001);
    s.batch_size = 50;
    s.dropout_p = 0.0;
    RoutingConfig r;
    r.grams = s.variant == Variant::CapsuleA ? std::vector<std::size_t>{3} : std::vector<std::size_t>{3, 4, 5};
    ConvSpec c;
    c.filters = r.conv_filters;
    c.kernel_sizes = r.grams;
    c.num_layers = r.grams.size();
    c.pool_window = 1;
    s.routing = r;
    s.conv = c;
  } else {
    fail(ErrorKind::Config, "unknown model '", name, "'");
  }
  if (s.is_cnn_hybrid()) s.conv = ConvSpec{};
  return s;
}

namespace detail {

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

inline std::vector<std::size_t> parse_sizes(std::string_view s) {
  std::vector<std::size_t> out;
  std::string item;
  std::istringstream in{std::string(s)};
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument("bad");
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      fail(ErrorKind::Config, "expected comma-separated non-negative integers, got '", s, "'");
    }
  }
  if (out.empty()) fail(ErrorKind::Config, "expected a non-empty integer list");
  return out;
}

inline std::size_t parse_size(std::string_view s) { return parse_sizes(s).at(0); }

inline double parse_real(std::string_view s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(s), &used);
    if (used != s.size()) throw std::invalid_argument("bad");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "expected a number, got '", s, "'");
  }
}

inline bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(ErrorKind::Config, "expected true/false, got '", s, "'");
}

inline std::string fmt_real(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

}  // namespace detail

// Applies one `key = value` setting (keys relative to the model section,
// e.g. `hidden`, `conv.kernels`, `routing.iterations`). Section keys on a
// variant that does not take that section are rejected.
inline void apply_model_setting(ModelSpec& s, std::string_view key, std::string_view value) {
  using namespace detail;
  auto section = [&](const char* prefix) { return key.substr(0, std::string_view(prefix).size()) == prefix; };
  if (section("conv.")) {
    if (!s.conv) fail(ErrorKind::Config, "model '", s.name(), "' takes no conv settings (", key, ")");
    auto& c = *s.conv;
    auto k = key.substr(5);
    if (k == "layers") c.num_layers = parse_size(value);
    else if (k == "filters") c.filters = parse_size(value);
    else if (k == "kernels") c.kernel_sizes = parse_sizes(value);
    else if (k == "pool") c.pool_window = parse_size(value);
    else if (k == "dilation") c.dilation = parse_size(value);
    else fail(ErrorKind::Config, "unknown key 'model.", key, "'");
    return;
  }
  if (section("routing.")) {
    if (!s.routing) fail(ErrorKind::Config, "model '", s.name(), "' takes no routing settings (", key, ")");
    auto& r = *s.routing;
    auto k = key.substr(8);
    if (k == "iterations") r.iterations = parse_size(value);
    else if (k == "capsule_dim") r.capsule_dim = parse_size(value);
    else if (k == "capsule_filters") r.capsule_filters = parse_size(value);
    else if (k == "conv_filters") {
      r.conv_filters = parse_size(value);
      s.conv->filters = r.conv_filters;
    } else if (k == "grams") r.grams = parse_sizes(value);
    else if (k == "m_plus") r.m_plus = parse_real(value);
    else if (k == "m_minus") r.m_minus = parse_real(value);
    else if (k == "lambda") r.lambda = parse_real(value);
    else fail(ErrorKind::Config, "unknown key 'model.", key, "'");
    return;
  }
  if (section("attention.")) {
    if (!s.attention) fail(ErrorKind::Config, "model '", s.name(), "' takes no attention settings (", key, ")");
    auto& a = *s.attention;
    auto k = key.substr(10);
    if (k == "word_context") a.word_context_dim = parse_size(value);
    else if (k == "sentence_context") a.sentence_context_dim = parse_size(value);
    else if (k == "encoder") a.word_encoder = parse_recurrent_kind(value);
    else if (k == "filter_sizes") a.conv_filter_sizes = parse_sizes(value);
    else if (k == "conv_filters") a.conv_filters = parse_size(value);
    else if (k == "sentence_len") a.sentence_len = parse_size(value);
    else fail(ErrorKind::Config, "unknown key 'model.", key, "'");
    return;
  }
  if (key == "hidden") s.hidden_units = parse_size(value);
  else if (key == "dense") s.dense_units = parse_size(value);
  else if (key == "dropout") s.dropout_p = parse_real(value);
  else if (key == "optimizer") s.optimizer.kind = parse_optimizer_kind(value);
  else if (key == "lr") s.optimizer.learning_rate = parse_real(value);
  else if (key == "decay") s.optimizer.decay = parse_real(value);
  else if (key == "beta1") s.optimizer.beta1 = parse_real(value);
  else if (key == "beta2") s.optimizer.beta2 = parse_real(value);
  else if (key == "rho") s.optimizer.rho = parse_real(value);
  else if (key == "epsilon") s.optimizer.epsilon = parse_real(value);
  else if (key == "batch_size") s.batch_size = parse_size(value);
  else if (key == "embedding_dim") s.embedding_dim = parse_size(value);
  else if (key == "max_len") s.max_len = parse_size(value);
  else if (key == "trainable_embeddings") s.trainable_embeddings = parse_bool(value);
  else if (key == "l1") s.l1 = parse_real(value);
  else if (key == "l2") s.l2 = parse_real(value);
  else if (key == "patience") s.early_stop_patience = static_cast<int>(parse_size(value));
  else if (key == "class_weights") s.class_weights = parse_bool(value);
  else if (key == "sentence_break_id") s.sentence_break_id = parse_size(value);
  else fail(ErrorKind::Config, "unknown key 'model.", key, "'");
}

// Canonical `key = value` serialization; `name` comes first so that
// spec_from_text can start from the matching preset.
inline std::string to_text(const ModelSpec& s) {
  using namespace detail;
  std::ostringstream o;
  o << "name = " << s.name() << '\n'
    << "hidden = " << s.hidden_units << '\n'
    << "dense = " << s.dense_units << '\n'
    << "dropout = " << fmt_real(s.dropout_p) << '\n'
    << "optimizer = " << to_string(s.optimizer.kind) << '\n'
    << "lr = " << fmt_real(s.optimizer.learning_rate) << '\n'
    << "decay = " << fmt_real(s.optimizer.decay) << '\n'
    << "beta1 = " << fmt_real(s.optimizer.beta1) << '\n'
    << "beta2 = " << fmt_real(s.optimizer.beta2) << '\n'
    << "rho = " << fmt_real(s.optimizer.rho) << '\n'
    << "epsilon = " << fmt_real(s.optimizer.epsilon) << '\n'
    << "batch_size = " << s.batch_size << '\n'
    << "embedding_dim = " << s.embedding_dim << '\n'
    << "max_len = " << s.max_len << '\n'
    << "trainable_embeddings = " << (s.trainable_embeddings ? "true" : "false") << '\n'
    << "l1 = " << fmt_real(s.l1) << '\n'
    << "l2 = " << fmt_real(s.l2) << '\n'
    << "patience = " << s.early_stop_patience << '\n'
    << "class_weights = " << (s.class_weights ? "true" : "false") << '\n';
  if (s.sentence_break_id) o << "sentence_break_id = " << *s.sentence_break_id << '\n';
  if (s.conv) {
    o << "conv.layers = " << s.conv->num_layers << '\n'
      << "conv.filters = " << s.conv->filters << '\n'
      << "conv.kernels = " << join_sizes(s.conv->kernel_sizes) << '\n'
      << "conv.pool = " << s.conv->pool_window << '\n'
      << "conv.dilation = " << s.conv->dilation << '\n';
  }
  if (s.routing) {
    o << "routing.iterations = " << s.routing->iterations << '\n'
      << "routing.capsule_dim = " << s.routing->capsule_dim << '\n'
      << "routing.capsule_filters = " << s.routing->capsule_filters << '\n'
      << "routing.conv_filters = " << s.routing->conv_filters << '\n'
      << "routing.grams = " << join_sizes(s.routing->grams) << '\n'
      << "routing.m_plus = " << fmt_real(s.routing->m_plus) << '\n'
      << "routing.m_minus = " << fmt_real(s.routing->m_minus) << '\n'
      << "routing.lambda = " << fmt_real(s.routing->lambda) << '\n';
  }
  if (s.attention) {
    o << "attention.word_context = " << s.attention->word_context_dim << '\n'
      << "attention.sentence_context = " << s.attention->sentence_context_dim << '\n'
      << "attention.encoder = " << to_string(s.attention->word_encoder) << '\n'
      << "attention.filter_sizes = " << join_sizes(s.attention->conv_filter_sizes) << '\n'
      << "attention.conv_filters = " << s.attention->conv_filters << '\n'
      << "attention.sentence_len = " << s.attention->sentence_len << '\n';
  }
  return o.str();
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline ModelSpec spec_from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::optional<ModelSpec> spec;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) fail(ErrorKind::Parse, "model spec line without '=': '", line, "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "name") {
      spec = model_preset(value);
    } else {
      if (!spec) fail(ErrorKind::Parse, "model spec must start with 'name'");
      apply_model_setting(*spec, key, value);
    }
  }
  if (!spec) fail(ErrorKind::Parse, "empty model spec");
  spec->validate();
  return *spec;
}

}  // namespace sforge
