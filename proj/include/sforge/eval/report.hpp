#pragma once

#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "sforge/eval/metrics.hpp"

namespace sforge {

struct ReproBlock {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  bool deterministic = true;
};

inline std::string fixed4(double v) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(4) << v;
  return o.str();
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Human-readable per-class table.
inline std::string metrics_table(const MetricsReport& m) {
  std::ostringstream o;
  o << std::left << std::setw(10) << "class" << std::right << std::setw(11) << "precision" << std::setw(9)
    << "recall" << std::setw(9) << "f1" << std::setw(11) << "support" << '\n';
  for (auto l : kAllLabels) {
    const auto c = index_of(l);
    o << std::left << std::setw(10) << to_string(l) << std::right << std::setw(11) << fixed4(m.precision[c])
      << std::setw(9) << fixed4(m.recall[c]) << std::setw(9) << fixed4(m.f1[c]) << std::setw(11)
      << fixed4(m.support[c]) << '\n';
  }
  o << std::left << std::setw(10) << "weighted" << std::right << std::setw(11) << fixed4(m.weighted_precision)
    << std::setw(9) << fixed4(m.weighted_recall) << std::setw(9) << fixed4(m.weighted_f1) << '\n';
  o << "accuracy " << fixed4(m.accuracy) << '\n';
  return o.str();
}

// `key = value` lines under a [section] header.
inline std::string metrics_block(const std::string& section, const MetricsReport& m,
                                 const ConfusionMatrix* cm = nullptr) {
  std::ostringstream o;
  o << '[' << section << "]\n";
  o << "accuracy = " << fixed4(m.accuracy) << '\n';
  o << "weighted_precision = " << fixed4(m.weighted_precision) << '\n';
  o << "weighted_recall = " << fixed4(m.weighted_recall) << '\n';
  o << "weighted_f1 = " << fixed4(m.weighted_f1) << '\n';
  for (auto l : kAllLabels) {
    const auto c = index_of(l);
    o << "precision." << to_string(l) << " = " << fixed4(m.precision[c]) << '\n';
    o << "recall." << to_string(l) << " = " << fixed4(m.recall[c]) << '\n';
    o << "f1." << to_string(l) << " = " << fixed4(m.f1[c]) << '\n';
    o << "support." << to_string(l) << " = " << fixed4(m.support[c]) << '\n';
  }
  if (cm) {
    for (auto l : kAllLabels) {
      o << "confusion." << to_string(l) << " =";
      for (auto v : cm->counts[index_of(l)]) o << ' ' << v;
      o << '\n';
    }
  }
  return o.str();
}

inline std::string repro_block(const ReproBlock& r) {
  std::ostringstream o;
  o << "[reproducibility]\n";
  o << "seed = " << r.seed << '\n';
  o << "config_hash = " << hex64(r.config_hash) << '\n';
  o << "mode = " << (r.deterministic ? "deterministic" : "nondeterministic") << '\n';
  return o.str();
}

inline std::string single_report(const MetricsReport& m, const ConfusionMatrix& cm, const ReproBlock& r) {
  return metrics_table(m) + '\n' + metrics_block("metrics", m, &cm) + repro_block(r);
}

// Parses the machine-readable part: "section.key" -> value.
inline std::map<std::string, std::string> parse_report(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line, section;
  while (std::getline(in, line)) {
    if (line.size() > 2 && line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    if (section.empty() || eq == std::string::npos) continue;
    out[section + "." + line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace sforge
