#include "hgd/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hgd/error.hpp"
#include "hgd/models.hpp"

namespace hgd {

namespace {

using json = nlohmann::json;

constexpr std::size_t kEvalBatch = 64;

Tensor gather_batch(const Dataset& data, std::span<const std::size_t> idx, std::vector<std::size_t>& labels) {
  const Shape& s = data[idx.front()].input.shape();
  Shape batch_shape{idx.size()};
  batch_shape.insert(batch_shape.end(), s.begin(), s.end());
  Tensor batch(batch_shape);
  const std::size_t stride = shape_size(s);
  labels.resize(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& sample = data[idx[b]];
    std::memcpy(batch.data() + b * stride, sample.input.data(), stride * sizeof(double));
    labels[b] = sample.label;
  }
  return batch;
}

void check_dataset(const Network& net, const Dataset& data, const char* what) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].input.shape() != net.input_shape()) {
      throw ShapeError(std::string(what) + " sample " + std::to_string(i) + " has shape " +
                       shape_str(data[i].input.shape()) + ", network expects " + shape_str(net.input_shape()));
    }
    if (data[i].label >= net.num_classes()) {
      throw ArgumentError(std::string(what) + " sample " + std::to_string(i) + " has label " +
                          std::to_string(data[i].label) + " but the network has " +
                          std::to_string(net.num_classes()) + " classes");
    }
  }
}

std::optional<double> median_epochs(const std::vector<std::optional<std::size_t>>& values) {
  if (values.empty()) return std::nullopt;
  std::vector<double> v;
  for (const auto& x : values) v.push_back(x ? static_cast<double>(*x) : std::numeric_limits<double>::infinity());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double m = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  if (std::isinf(m)) return std::nullopt;
  return m;
}

json report_json(const TrainReport& r) {
  return json{{"loss", r.loss}, {"train_acc", r.train_accuracy}, {"val_acc", r.val_accuracy}};
}

json optional_json(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ArgumentError("epochs must be at least 1");
  if (cfg.batch_size < 1) throw ArgumentError("batch size must be at least 1");
  if (!(cfg.lr > 0.0)) throw ArgumentError("learning rate must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ArgumentError("momentum must be in [0, 1)");
}

std::optional<std::size_t> TrainReport::epochs_to_target(double threshold) const {
  const auto& series = val_accuracy.empty() ? train_accuracy : val_accuracy;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i] >= threshold) return i + 1;
  }
  return std::nullopt;
}

std::string TrainReport::to_jsonl() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < loss.size(); ++i) {
    json line{{"epoch", i + 1}, {"loss", loss[i]}, {"train_acc", train_accuracy[i]}};
    line["val_acc"] = i < val_accuracy.size() ? json(val_accuracy[i]) : json(nullptr);
    out << line.dump() << '\n';
  }
  return out.str();
}

Dataset to_dataset(const std::vector<LabeledSample>& samples) {
  Dataset d;
  d.reserve(samples.size());
  for (const auto& s : samples) d.push_back({image_to_tensor(s.image), s.label});
  return d;
}

Split stratified_split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ArgumentError("train fraction must be in (0, 1]");
  std::size_t classes = 0;
  for (const auto& s : data) classes = std::max(classes, s.label + 1);
  Split split;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].label == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    Rng rng(mix_seed(seed, c));
    rng.shuffle(idx);
    auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2 && train_fraction < 1.0) n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    n_train = std::min(n_train, idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) (k < n_train ? split.train : split.validation).push_back(data[idx[k]]);
  }
  return split;
}

std::vector<std::size_t> predict_labels(const Network& net, const Dataset& data) {
  std::vector<std::size_t> out;
  out.reserve(data.size());
  std::vector<std::size_t> idx;
  std::vector<std::size_t> labels;
  for (std::size_t start = 0; start < data.size(); start += kEvalBatch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + kEvalBatch); ++i) idx.push_back(i);
    const Tensor probs = net.forward(gather_batch(data, idx, labels));
    const std::size_t k = probs.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const double* row = probs.data() + b * k;
      out.push_back(static_cast<std::size_t>(std::max_element(row, row + k) - row));
    }
  }
  return out;
}

double accuracy(const Network& net, const Dataset& data) {
  if (data.empty()) throw ArgumentError("accuracy of an empty dataset");
  const auto pred = predict_labels(net, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += pred[i] == data[i].label;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainReport train(Network& net, const Dataset& data, const Dataset* validation, const TrainConfig& cfg) {
  validate(cfg);
  if (data.empty()) throw ArgumentError("training set is empty");
  check_dataset(net, data, "training");
  if (validation && validation->empty()) validation = nullptr;
  if (validation) check_dataset(net, *validation, "validation");

  TrainReport report;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::size_t> labels;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Tensor batch = gather_batch(data, idx, labels);
      net.zero_grad();
      loss_sum += net.train_batch(batch, labels) * static_cast<double>(idx.size());
      sgd_step(net, cfg.lr, cfg.momentum);
    }
    ++net.meta().epochs_trained;
    report.loss.push_back(loss_sum / static_cast<double>(data.size()));
    report.train_accuracy.push_back(accuracy(net, data));
    if (validation) report.val_accuracy.push_back(accuracy(net, *validation));

    if (cfg.stop_at_accuracy) {
      const double monitored = validation ? report.val_accuracy.back() : report.train_accuracy.back();
      if (monitored >= *cfg.stop_at_accuracy) break;
    }
  }
  return report;
}

Network replace_head(const Network& net, std::size_t new_num_classes, std::uint64_t seed) {
  if (new_num_classes < 2) throw ArgumentError("replace_head: need at least 2 classes");
  const auto& layers = net.layers();
  if (layers.size() < 2 || layers[layers.size() - 2].kind != LayerKind::dense) {
    throw ArgumentError("replace_head: network has no dense classification head");
  }
  const std::size_t head = layers.size() - 2;
  auto new_layers = layers;
  new_layers[head].out = new_num_classes;

  Network out(net.input_shape(), new_layers);
  for (auto i : net.param_layers()) {
    if (i == head) continue;
    out.params(i) = net.params(i);
  }
  Rng rng(seed);
  out.init_layer_he(head, rng);
  out.params(head).trainable = true;
  out.meta() = net.meta();
  out.meta().labels.clear();
  return out;
}

void set_trainable(Network& net, std::size_t frozen_prefix) {
  const auto layers = net.param_layers();
  if (frozen_prefix > layers.size()) {
    throw ArgumentError("set_trainable: prefix " + std::to_string(frozen_prefix) + " exceeds " +
                        std::to_string(layers.size()) + " parameterised layers");
  }
  for (std::size_t j = 0; j < layers.size(); ++j) net.params(layers[j]).trainable = j >= frozen_prefix;
}

std::optional<double> TransferComparison::median_transfer_epochs() const {
  std::vector<std::optional<std::size_t>> v;
  for (const auto& r : runs) v.push_back(r.transfer_epochs);
  return median_epochs(v);
}

std::optional<double> TransferComparison::median_scratch_epochs() const {
  std::vector<std::optional<std::size_t>> v;
  for (const auto& r : runs) v.push_back(r.scratch_epochs);
  return median_epochs(v);
}

std::size_t TransferComparison::transfer_strict_wins() const {
  std::size_t wins = 0;
  for (const auto& r : runs) {
    if (r.transfer_epochs && (!r.scratch_epochs || *r.transfer_epochs < *r.scratch_epochs)) ++wins;
  }
  return wins;
}

std::string TransferComparison::to_json() const {
  json runs_json = json::array();
  for (const auto& r : runs) {
    runs_json.push_back({{"seed", r.seed},
                         {"transfer_epochs_to_target", optional_json(r.transfer_epochs)},
                         {"scratch_epochs_to_target", optional_json(r.scratch_epochs)},
                         {"pretrain", report_json(r.pretrain)},
                         {"transfer", report_json(r.transfer)},
                         {"scratch", report_json(r.scratch)}});
  }
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"target_accuracy", target_accuracy},
              {"median_transfer_epochs", opt(median_transfer_epochs())},
              {"median_scratch_epochs", opt(median_scratch_epochs())},
              {"transfer_strict_wins", transfer_strict_wins()},
              {"runs", runs_json}}
      .dump(2);
}

TransferComparison transfer_experiment(const Dataset& pretrain_set, const Dataset& binary_set,
                                       const TransferConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ArgumentError("transfer_experiment: no seeds given");
  if (pretrain_set.empty() || binary_set.empty()) throw ArgumentError("transfer_experiment: empty dataset");
  std::size_t pre_classes = 0;
  for (const auto& s : pretrain_set) pre_classes = std::max(pre_classes, s.label + 1);
  if (pre_classes < 2) throw ArgumentError("transfer_experiment: pretraining needs at least 2 classes");
  validate(cfg.pretrain);
  validate(cfg.finetune);

  TransferComparison result;
  result.target_accuracy = cfg.target_accuracy;
  for (const auto seed : seeds) {
    SeedOutcome outcome;
    outcome.seed = seed;
    const Split split = stratified_split(binary_set, cfg.train_fraction, mix_seed(seed, 4));

    const Network initial = build_mini_backbone(pre_classes, seed);
    const std::uint64_t head_seed = mix_seed(seed, 3);

    TrainConfig pre = cfg.pretrain;
    pre.seed = mix_seed(seed, 1);
    TrainConfig fine = cfg.finetune;
    fine.seed = mix_seed(seed, 2);
    if (cfg.stop_at_target) fine.stop_at_accuracy = cfg.target_accuracy;

    Network backbone = initial;
    outcome.pretrain = train(backbone, pretrain_set, nullptr, pre);

    Network transferred = replace_head(backbone, 2, head_seed);
    set_trainable(transferred, cfg.frozen_prefix);
    outcome.transfer = train(transferred, split.train, &split.validation, fine);
    outcome.transfer_epochs = outcome.transfer.epochs_to_target(cfg.target_accuracy);

    Network scratch = replace_head(initial, 2, head_seed);
    outcome.scratch = train(scratch, split.train, &split.validation, fine);
    outcome.scratch_epochs = outcome.scratch.epochs_to_target(cfg.target_accuracy);

    result.runs.push_back(std::move(outcome));
  }
  return result;
}

}  // namespace hgd
