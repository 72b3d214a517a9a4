#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hgd/tensor.hpp"

namespace hgd {

enum class LayerKind { conv2d, relu, maxpool2x2, flatten, dense, softmax };

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

/// One entry of a network's layer stack. `in`/`out` are channels for
/// conv2d (3x3, stride 1, same padding) and features for dense.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in = 0;
  std::size_t out = 0;

  static LayerSpec conv2d(std::size_t in_channels, std::size_t out_channels) {
    return {LayerKind::conv2d, in_channels, out_channels};
  }
  static LayerSpec dense(std::size_t in_features, std::size_t out_features) {
    return {LayerKind::dense, in_features, out_features};
  }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0}; }
  static LayerSpec maxpool2x2() { return {LayerKind::maxpool2x2, 0, 0}; }
  static LayerSpec flatten() { return {LayerKind::flatten, 0, 0}; }
  static LayerSpec softmax() { return {LayerKind::softmax, 0, 0}; }

  bool has_params() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Weights, bias and their gradient/velocity buffers for a conv2d or dense layer.
struct LayerParams {
  Tensor weight;
  Tensor bias;
  Tensor grad_weight;
  Tensor grad_bias;
  Tensor velocity_weight;
  Tensor velocity_bias;
  bool trainable = true;
};

/// Descriptive data carried alongside the parameters into checkpoints.
struct NetworkMeta {
  std::uint64_t seed = 0;
  std::size_t epochs_trained = 0;
  std::vector<std::string> labels;
};

/// Activations recorded by a forward pass, consumed by `backward`.
struct ForwardTrace {
  std::vector<Tensor> inputs;  ///< inputs[i] is the input of layer i; inputs.back() is the network output
  std::vector<std::vector<std::size_t>> argmax;  ///< per layer, only filled for maxpool
};

/// Sequential layer stack over a fixed per-sample input shape (C x H x W).
/// The stack must end with dense + softmax; training uses the fused
/// softmax/cross-entropy gradient.
class Network {
 public:
  Network() = default;
  /// Validates shape compatibility layer by layer and allocates zeroed
  /// parameters. Throws ShapeError on any mismatch.
  Network(Shape input_shape, std::vector<LayerSpec> layers);

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  /// Per-sample output shape of every layer.
  const std::vector<Shape>& output_shapes() const { return output_shapes_; }
  std::size_t num_classes() const { return output_shapes_.empty() ? 0 : output_shapes_.back().at(0); }

  LayerParams& params(std::size_t layer) { return params_.at(layer); }
  const LayerParams& params(std::size_t layer) const { return params_.at(layer); }
  /// Indices of conv2d/dense layers, in stack order.
  std::vector<std::size_t> param_layers() const;
  std::size_t param_count() const;

  NetworkMeta& meta() { return meta_; }
  const NetworkMeta& meta() const { return meta_; }

  /// He-normal weights (stddev sqrt(2 / fan_in)), zero biases, drawn in
  /// layer order from Rng(seed).
  void init_he(std::uint64_t seed);
  /// Re-initialises a single parameterised layer from its own stream.
  void init_layer_he(std::size_t layer, Rng& rng);

  /// Probabilities for a single sample (input_shape) or a batch (N x input_shape).
  Tensor forward(const Tensor& x) const;
  Tensor forward(const Tensor& x, ForwardTrace& trace) const;

  /// Accumulates parameter gradients for d(loss)/d(logits) = grad_logits.
  void backward(const ForwardTrace& trace, const Tensor& grad_logits);
  void zero_grad();

  /// Forward + mean cross-entropy + backward on one minibatch. Returns the
  /// loss; gradients are accumulated (call zero_grad first). `probs_out`, if
  /// given, receives the batch probabilities.
  double train_batch(const Tensor& batch, std::span<const std::size_t> labels, Tensor* probs_out = nullptr);

  friend bool operator==(const Network& a, const Network& b);

 private:
  Tensor as_batch(const Tensor& x) const;

  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> output_shapes_;
  std::vector<LayerParams> params_;
  NetworkMeta meta_;
};

/// Momentum SGD over trainable layers: v = momentum * v + grad; p -= lr * v.
void sgd_step(Network& net, double lr, double momentum);

struct GradCheckOptions {
  double eps = 1e-5;
  /// 0 checks every parameter; otherwise at most this many entries per
  /// weight/bias tensor, picked with a seeded shuffle.
  std::size_t max_per_tensor = 0;
  std::uint64_t sample_seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Entries whose +/-eps perturbation flipped a ReLU mask or a max-pool
  /// winner at every tried step size, so the finite difference straddles a kink.
  std::size_t skipped = 0;
};

/// Central differences of the cross-entropy loss against backprop for every
/// (or a sample of every) parameter. Relative error is
/// |a - b| / max(|a|, |b|, 1e-8). Leaves the network's parameters unchanged.
GradCheckResult grad_check(Network& net, const Tensor& input, std::size_t label, const GradCheckOptions& opts);
double grad_check(Network& net, const Tensor& input, std::size_t label, double eps);

}  // namespace hgd
