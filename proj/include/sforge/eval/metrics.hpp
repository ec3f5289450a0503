#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sforge/textprep/corpus.hpp"

namespace sforge {

// rows = actual, columns = predicted
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& r : counts)
      for (auto c : r) t += c;
    return t;
  }
  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < kNumClasses; ++i) t += counts[i][i];
    return t;
  }
  std::uint64_t row_sum(std::size_t r) const {
    std::uint64_t t = 0;
    for (auto c : counts[r]) t += c;
    return t;
  }
  std::uint64_t col_sum(std::size_t c) const {
    std::uint64_t t = 0;
    for (const auto& r : counts) t += r[c];
    return t;
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

namespace detail {

inline std::size_t checked_index(Label l) {
  const auto i = index_of(l);
  if (i >= kNumClasses) fail(ErrorKind::Label, "unknown label index ", i);
  return i;
}

}  // namespace detail

inline ConfusionMatrix confusion(std::span<const Label> preds, std::span<const Label> actuals) {
  if (preds.size() != actuals.size()) {
    fail(ErrorKind::Input, "prediction count ", preds.size(), " != actual count ", actuals.size());
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ++cm.counts[detail::checked_index(actuals[i])][detail::checked_index(preds[i])];
  }
  return cm;
}

inline ConfusionMatrix confusion(std::span<const std::string> preds, std::span<const std::string> actuals) {
  std::vector<Label> p, a;
  for (const auto& s : preds) p.push_back(parse_label(s));
  for (const auto& s : actuals) a.push_back(parse_label(s));
  return confusion(p, a);
}

struct MetricsReport {
  double accuracy = 0.0;
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  std::array<double, kNumClasses> support{};
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
};

inline MetricsReport weighted_metrics(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) fail(ErrorKind::Metrics, "confusion matrix is empty");
  MetricsReport m;
  const double n = static_cast<double>(total);
  m.accuracy = static_cast<double>(cm.trace()) / n;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double tp = static_cast<double>(cm.counts[c][c]);
    const auto col = cm.col_sum(c), row = cm.row_sum(c);
    m.precision[c] = col ? tp / static_cast<double>(col) : 0.0;
    m.recall[c] = row ? tp / static_cast<double>(row) : 0.0;
    const double ps = m.precision[c] + m.recall[c];
    m.f1[c] = ps > 0 ? 2.0 * m.precision[c] * m.recall[c] / ps : 0.0;
    m.support[c] = static_cast<double>(row);
    m.weighted_precision += m.precision[c] * m.support[c] / n;
    m.weighted_recall += m.recall[c] * m.support[c] / n;
    m.weighted_f1 += m.f1[c] * m.support[c] / n;
  }
  return m;
}

// Unweighted mean over reports, field by field.
inline MetricsReport mean_report(std::span<const MetricsReport> reports) {
  if (reports.empty()) fail(ErrorKind::Metrics, "no reports to aggregate");
  MetricsReport m;
  const double k = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    m.accuracy += r.accuracy / k;
    m.weighted_precision += r.weighted_precision / k;
    m.weighted_recall += r.weighted_recall / k;
    m.weighted_f1 += r.weighted_f1 / k;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      m.precision[c] += r.precision[c] / k;
      m.recall[c] += r.recall[c] / k;
      m.f1[c] += r.f1[c] / k;
      m.support[c] += r.support[c] / k;
    }
  }
  return m;
}

struct KappaResult {
  std::optional<double> kappa;  // empty when chance agreement is 1 but observed is not
  double observed = 0.0;
  double expected = 0.0;
  std::size_t items = 0;
};

inline KappaResult cohens_kappa(std::span<const Label> a, std::span<const Label> b) {
  if (a.size() != b.size()) fail(ErrorKind::Input, "annotation lengths differ: ", a.size(), " vs ", b.size());
  if (a.empty()) fail(ErrorKind::Input, "kappa needs at least one item");
  const auto cm = confusion(b, a);
  const double n = static_cast<double>(a.size());
  KappaResult r;
  r.items = a.size();
  r.observed = static_cast<double>(cm.trace()) / n;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    r.expected += (static_cast<double>(cm.row_sum(c)) / n) * (static_cast<double>(cm.col_sum(c)) / n);
  }
  if (r.expected == 1.0) {
    if (r.observed == 1.0) r.kappa = 1.0;
  } else {
    r.kappa = (r.observed - r.expected) / (1.0 - r.expected);
  }
  return r;
}

}  // namespace sforge
