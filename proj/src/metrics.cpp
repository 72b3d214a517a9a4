#include "hgd/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hgd/error.hpp"

namespace hgd {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::size_t parse_count(std::string_view field, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw ArgumentError("pairs CSV line " + std::to_string(line) + ": '" + std::string(field) +
                        "' is not a class index");
  }
  return v;
}

}  // namespace

ConfusionMatrix from_pairs(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                           std::size_t positive_class) {
  if (predictions.size() != labels.size()) {
    throw ArgumentError("from_pairs: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = predictions[i] == positive_class;
    const bool actual = labels[i] == positive_class;
    if (actual) {
      ++(predicted ? cm.tp : cm.fn);
    } else {
      ++(predicted ? cm.fp : cm.tn);
    }
  }
  return cm;
}

std::optional<double> accuracy(const ConfusionMatrix& cm) { return ratio(cm.tp + cm.tn, cm.total()); }

std::optional<double> precision(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fp); }

std::optional<double> recall(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fn); }

std::optional<double> f1(const ConfusionMatrix& cm) {
  const auto p = precision(cm);
  const auto r = recall(cm);
  if (!p || !r || *p + *r == 0.0) return std::nullopt;
  return 2.0 * (*p * *r) / (*p + *r);
}

MetricRow make_metric_row(std::string model, const ConfusionMatrix& cm) {
  return {std::move(model), cm, accuracy(cm), precision(cm), recall(cm), f1(cm)};
}

std::string render_table(const std::vector<MetricRow>& rows) {
  std::size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.model.size());
  std::ostringstream out;
  out << pad_right("Model", name_w);
  for (const char* h : {"TP", "FN", "TN", "FP"}) out << pad_left(h, 7);
  for (const char* h : {"P", "R", "F1", "Acc"}) out << pad_left(h, 9);
  out << '\n';
  for (const auto& r : rows) {
    out << pad_right(r.model, name_w);
    for (auto v : {r.counts.tp, r.counts.fn, r.counts.tn, r.counts.fp}) out << pad_left(std::to_string(v), 7);
    for (const auto& v : {r.precision, r.recall, r.f1, r.accuracy}) out << pad_left(percent(v), 9);
    out << '\n';
  }
  return out.str();
}

std::string metric_rows_to_json(const std::vector<MetricRow>& rows) {
  using json = nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"model", r.model},
                   {"tp", r.counts.tp},
                   {"fn", r.counts.fn},
                   {"tn", r.counts.tn},
                   {"fp", r.counts.fp},
                   {"accuracy", opt(r.accuracy)},
                   {"precision", opt(r.precision)},
                   {"recall", opt(r.recall)},
                   {"f1", opt(r.f1)}});
  }
  return arr.dump(2);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> parse_pairs_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("pairs CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "pred,label") throw ArgumentError("pairs CSV header must be 'pred,label', got '" + line + "'");
  std::vector<std::size_t> preds;
  std::vector<std::size_t> labels;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ArgumentError("pairs CSV line " + std::to_string(n) + " has no comma");
    preds.push_back(parse_count(std::string_view(line).substr(0, comma), n));
    labels.push_back(parse_count(std::string_view(line).substr(comma + 1), n));
  }
  return {std::move(preds), std::move(labels)};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> read_pairs_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pairs_csv(buf.str());
}

}  // namespace hgd
