#pragma once

// Minibatch training, head replacement, layer freezing and the
// transfer-vs-scratch comparison.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hgd/datagen.hpp"
#include "hgd/network.hpp"

namespace hgd {

struct TrainConfig {
  std::size_t epochs = 10;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool shuffle = true;
  /// Stop early once the monitored accuracy (validation if given, else
  /// training) reaches this value.
  std::optional<double> stop_at_accuracy;
};

void validate(const TrainConfig& cfg);

/// Per-epoch learning curve. All series have one entry per epoch run.
struct TrainReport {
  std::vector<double> loss;  ///< mean minibatch loss over the epoch
  std::vector<double> train_accuracy;
  std::vector<double> val_accuracy;  ///< empty when trained without validation data

  std::size_t epochs() const { return loss.size(); }
  /// First epoch (1-based) whose validation accuracy (training accuracy if
  /// there is no validation series) reaches `threshold`.
  std::optional<std::size_t> epochs_to_target(double threshold) const;
  /// One JSON object per epoch: {"epoch","loss","train_acc","val_acc"}.
  std::string to_jsonl() const;
};

struct Sample {
  Tensor input;
  std::size_t label = 0;
};
using Dataset = std::vector<Sample>;

Dataset to_dataset(const std::vector<LabeledSample>& samples);

struct Split {
  Dataset train;
  Dataset validation;
};

/// Per-class seeded shuffle; the first round(fraction * class size) samples
/// of each class go to training (at least one sample each side when the
/// class has two or more).
Split stratified_split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// Fraction of samples whose argmax prediction equals the label.
double accuracy(const Network& net, const Dataset& data);
/// Predicted class of every sample, in order.
std::vector<std::size_t> predict_labels(const Network& net, const Dataset& data);

/// Shuffled minibatch momentum SGD on mean cross-entropy. Bitwise
/// deterministic for a fixed network, data order and config.
TrainReport train(Network& net, const Dataset& data, const Dataset* validation, const TrainConfig& cfg);

/// Copy of `net` with the final dense layer swapped for a freshly
/// He-initialised one with `new_num_classes` outputs. Every other parameter
/// is copied bit for bit. Throws ArgumentError if the layer before the
/// softmax is not dense.
Network replace_head(const Network& net, std::size_t new_num_classes, std::uint64_t seed);

/// Freezes the first `frozen_prefix` parameterised layers and unfreezes the rest.
void set_trainable(Network& net, std::size_t frozen_prefix);

struct TransferConfig {
  TrainConfig pretrain;
  TrainConfig finetune;
  double target_accuracy = 0.95;
  double train_fraction = 0.8;
  std::size_t frozen_prefix = 0;
  /// Stop each fine-tuning arm as soon as it hits the target.
  bool stop_at_target = true;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  TrainReport pretrain;
  TrainReport transfer;
  TrainReport scratch;
  std::optional<std::size_t> transfer_epochs;
  std::optional<std::size_t> scratch_epochs;
};

struct TransferComparison {
  double target_accuracy = 0.0;
  std::vector<SeedOutcome> runs;

  /// Medians with "never reached" counted as larger than any epoch count.
  std::optional<double> median_transfer_epochs() const;
  std::optional<double> median_scratch_epochs() const;
  /// Seeds where the transfer arm reached the target strictly earlier.
  std::size_t transfer_strict_wins() const;
  std::string to_json() const;
};

/// For each seed: pretrain a backbone (init seed = the seed) on
/// `pretrain_set`, replace its head with 2 classes and fine-tune on a
/// stratified split of `binary_set`; separately train a network with the
/// same initial backbone weights and the same new head from scratch on the
/// same split and data order. Throws ArgumentError on an empty seed list.
TransferComparison transfer_experiment(const Dataset& pretrain_set, const Dataset& binary_set,
                                       const TransferConfig& cfg, const std::vector<std::uint64_t>& seeds);

}  // namespace hgd
