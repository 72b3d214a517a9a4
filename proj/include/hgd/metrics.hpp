#pragma once

// Binary detection metrics from confusion-matrix counts. Metrics whose
// denominator is zero are reported as std::nullopt ("undefined"), never as
// 0 or 1.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hgd {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;

  std::size_t positives() const { return tp + fn; }
  std::size_t negatives() const { return tn + fp; }
  std::size_t total() const { return positives() + negatives(); }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Counts each (prediction, label) pair against `positive_class`.
/// Throws ArgumentError when the lists differ in length.
ConfusionMatrix from_pairs(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                           std::size_t positive_class);

/// (TP + TN) / (P + N)
std::optional<double> accuracy(const ConfusionMatrix& cm);
/// TP / (TP + FP)
std::optional<double> precision(const ConfusionMatrix& cm);
/// TP / (TP + FN)
std::optional<double> recall(const ConfusionMatrix& cm);
/// 2PR / (P + R); undefined if either input is undefined or both are zero.
std::optional<double> f1(const ConfusionMatrix& cm);

struct MetricRow {
  std::string model;
  ConfusionMatrix counts;
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

MetricRow make_metric_row(std::string model, const ConfusionMatrix& cm);

/// Fixed-width table, metrics as percentages with two decimals ("n/a" when undefined).
std::string render_table(const std::vector<MetricRow>& rows);

/// JSON array of rows with keys model, tp, fn, tn, fp, accuracy, precision,
/// recall, f1 (fractions; null when undefined).
std::string metric_rows_to_json(const std::vector<MetricRow>& rows);

/// Parses "pred,label" CSV text (header required) into parallel lists.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> parse_pairs_csv(const std::string& text);
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> read_pairs_csv(const std::filesystem::path& path);

}  // namespace hgd
