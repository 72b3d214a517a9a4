#include "hgd/models.hpp"

#include <algorithm>

#include "hgd/error.hpp"

namespace hgd {

Network build_detector_cnn(std::size_t num_classes, std::size_t in_channels, std::uint64_t seed, std::size_t input_size) {
  if (num_classes < 2) throw ArgumentError("build_detector_cnn: need at least 2 classes");
  if (in_channels != 1 && in_channels != 3) throw ArgumentError("build_detector_cnn: in_channels must be 1 or 3");
  if (input_size == 0 || input_size % 4 != 0) throw ArgumentError("build_detector_cnn: input size must be a multiple of 4");

  const std::size_t pooled = input_size / 4;
  const std::size_t features = 64 * pooled * pooled;
  Network net({in_channels, input_size, input_size},
              {
                  LayerSpec::conv2d(in_channels, 32), LayerSpec::relu(),
                  LayerSpec::conv2d(32, 32), LayerSpec::relu(),
                  LayerSpec::maxpool2x2(),
                  LayerSpec::conv2d(32, 64), LayerSpec::relu(),
                  LayerSpec::conv2d(64, 64), LayerSpec::relu(),
                  LayerSpec::conv2d(64, 64), LayerSpec::relu(),
                  LayerSpec::maxpool2x2(),
                  LayerSpec::flatten(),
                  LayerSpec::dense(features, 1024), LayerSpec::relu(),
                  LayerSpec::dense(1024, 1024), LayerSpec::relu(),
                  LayerSpec::dense(1024, num_classes),
                  LayerSpec::softmax(),
              });
  net.init_he(seed);
  return net;
}

Network build_mini_backbone(std::size_t num_classes, std::uint64_t seed) {
  return build_detector_cnn(num_classes, 1, seed, kPatchSize);
}

std::size_t detector_cnn_param_count(std::size_t num_classes, std::size_t in_channels, std::size_t input_size) {
  auto conv = [](std::size_t in, std::size_t out) { return out * in * 9 + out; };
  auto dense = [](std::size_t in, std::size_t out) { return out * in + out; };
  const std::size_t features = 64 * (input_size / 4) * (input_size / 4);
  return conv(in_channels, 32) + conv(32, 32) + conv(32, 64) + conv(64, 64) + conv(64, 64) + dense(features, 1024) +
         dense(1024, 1024) + dense(1024, num_classes);
}

Tensor image_to_tensor(const GrayImage& img) {
  Tensor t({1, img.height, img.width});
  for (std::size_t i = 0; i < img.data.size(); ++i) t[i] = img.data[i] / 255.0;
  return t;
}

Prediction predict(const Network& net, const Tensor& patch) {
  if (patch.shape() != net.input_shape()) {
    throw ShapeError("predict: patch " + shape_str(patch.shape()) + " expected " + shape_str(net.input_shape()));
  }
  const Tensor probs = net.forward(patch);
  Prediction p;
  p.probabilities.assign(probs.values().begin(), probs.values().end());
  p.class_index = static_cast<std::size_t>(std::max_element(p.probabilities.begin(), p.probabilities.end()) -
                                           p.probabilities.begin());
  p.probability = p.probabilities[p.class_index];
  return p;
}

}  // namespace hgd
