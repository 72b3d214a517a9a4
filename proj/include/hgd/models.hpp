#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hgd/imgproc.hpp"
#include "hgd/network.hpp"

namespace hgd {

/// Side length of the classifier input patch.
inline constexpr std::size_t kPatchSize = 32;

/// Five 3x3 conv layers (32, 32, pool, 64, 64, 64, pool), each followed by
/// ReLU, then dense 1024 -> 1024 -> num_classes with softmax. At the default
/// 32x32 input the flattened feature vector has 4096 entries. `input_size`
/// must be a positive multiple of 4; it exists so the full stack can be
/// gradient-checked at small spatial sizes.
Network build_detector_cnn(std::size_t num_classes, std::size_t in_channels = 1, std::uint64_t seed = 0,
                        std::size_t input_size = kPatchSize);

/// Donor network for transfer experiments: the same topology on grayscale
/// 32x32 input with a `num_classes` head.
Network build_mini_backbone(std::size_t num_classes, std::uint64_t seed = 0);

/// Closed-form parameter count of `build_detector_cnn`.
std::size_t detector_cnn_param_count(std::size_t num_classes, std::size_t in_channels, std::size_t input_size = kPatchSize);

/// 1 x H x W tensor with pixels scaled into [0, 1].
Tensor image_to_tensor(const GrayImage& img);

struct Prediction {
  std::size_t class_index = 0;
  std::vector<double> probabilities;
  double probability = 0.0;  ///< probabilities[class_index]

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

Prediction predict(const Network& net, const Tensor& patch);

// ---- checkpoints ----
//
// Layout: "HGCKPT01" | u64 LE header length | UTF-8 JSON header with keys
// "version", "layers", "shapes", "meta" | little-endian float32 blobs,
// weight then bias for each parameterised layer in stack order.

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Network& net);
Network parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace hgd
