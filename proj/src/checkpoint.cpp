#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include <json.hpp>

#include "hgd/error.hpp"
#include "hgd/models.hpp"

namespace hgd {

namespace {

using json = nlohmann::json;
using Kind = CheckpointError::Kind;

constexpr std::string_view kMagic = "HGCKPT01";
constexpr std::size_t kPrefix = 16;  // magic + header length

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double get_f32(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
  return static_cast<double>(std::bit_cast<float>(bits));
}

json layer_to_json(const LayerSpec& l, bool trainable) {
  json j{{"kind", to_string(l.kind)}};
  if (l.kind == LayerKind::conv2d) {
    j["in_channels"] = l.in;
    j["out_channels"] = l.out;
  } else if (l.kind == LayerKind::dense) {
    j["in_features"] = l.in;
    j["out_features"] = l.out;
  }
  if (l.has_params()) j["trainable"] = trainable;
  return j;
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec l;
  l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  if (l.kind == LayerKind::conv2d) {
    l.in = j.at("in_channels").get<std::size_t>();
    l.out = j.at("out_channels").get<std::size_t>();
  } else if (l.kind == LayerKind::dense) {
    l.in = j.at("in_features").get<std::size_t>();
    l.out = j.at("out_features").get<std::size_t>();
  }
  return l;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Network& net) {
  json layers = json::array();
  json shapes = json::array();
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    layers.push_back(layer_to_json(net.layers()[i], net.params(i).trainable));
    if (net.layers()[i].has_params()) {
      shapes.push_back(net.params(i).weight.shape());
      shapes.push_back(net.params(i).bias.shape());
    }
  }
  const auto& m = net.meta();
  json header{
      {"version", kCheckpointVersion},
      {"layers", layers},
      {"shapes", shapes},
      {"meta",
       {{"seed", m.seed},
        {"epochs_trained", m.epochs_trained},
        {"num_classes", net.num_classes()},
        {"labels", m.labels},
        {"input_shape", net.input_shape()}}},
  };
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + 4 * net.param_count());
  for (auto i : net.param_layers()) {
    for (double v : net.params(i).weight.values()) put_f32(out, v);
    for (double v : net.params(i).bias.values()) put_f32(out, v);
  }
  return out;
}

Network parse_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size()) throw CheckpointError(Kind::truncated, "checkpoint shorter than its magic");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw CheckpointError(Kind::bad_magic, "not a checkpoint (bad magic)");
  }
  if (bytes.size() < kPrefix) throw CheckpointError(Kind::truncated, "checkpoint truncated in header length");
  const std::uint64_t header_len = get_u64(bytes.data() + kMagic.size());
  if (header_len > bytes.size() - kPrefix) throw CheckpointError(Kind::truncated, "checkpoint truncated in JSON header");

  json header;
  try {
    header = json::parse(bytes.begin() + kPrefix, bytes.begin() + kPrefix + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::bad_header, std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  Network net;
  std::vector<Shape> shapes;
  try {
    const auto version = header.at("version").get<std::uint32_t>();
    if (version != kCheckpointVersion) {
      throw CheckpointError(Kind::version_mismatch, "checkpoint version " + std::to_string(version) +
                                                        " (supported: " + std::to_string(kCheckpointVersion) + ")");
    }
    std::vector<LayerSpec> layers;
    std::vector<bool> trainable;
    for (const auto& jl : header.at("layers")) {
      layers.push_back(layer_from_json(jl));
      trainable.push_back(jl.value("trainable", true));
    }
    const auto& meta = header.at("meta");
    net = Network(meta.at("input_shape").get<Shape>(), std::move(layers));
    for (std::size_t i = 0; i < trainable.size(); ++i) net.params(i).trainable = trainable[i];
    net.meta().seed = meta.at("seed").get<std::uint64_t>();
    net.meta().epochs_trained = meta.at("epochs_trained").get<std::size_t>();
    net.meta().labels = meta.at("labels").get<std::vector<std::string>>();
    for (const auto& s : header.at("shapes")) shapes.push_back(s.get<Shape>());
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::bad_header, std::string("checkpoint header is incomplete: ") + e.what());
  } catch (const ShapeError& e) {
    throw CheckpointError(Kind::bad_header, std::string("checkpoint layers are inconsistent: ") + e.what());
  }

  // Declared shapes must agree with the architecture, and the blob with the shapes.
  std::vector<Tensor*> targets;
  for (auto i : net.param_layers()) {
    targets.push_back(&net.params(i).weight);
    targets.push_back(&net.params(i).bias);
  }
  if (shapes.size() != targets.size()) {
    throw CheckpointError(Kind::length_mismatch, "checkpoint lists " + std::to_string(shapes.size()) +
                                                     " parameter shapes, architecture needs " +
                                                     std::to_string(targets.size()));
  }
  std::size_t floats = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (shapes[t] != targets[t]->shape()) {
      throw CheckpointError(Kind::length_mismatch, "parameter " + std::to_string(t) + " declared " +
                                                       shape_str(shapes[t]) + " but the layer needs " +
                                                       shape_str(targets[t]->shape()));
    }
    floats += targets[t]->size();
  }
  const std::size_t blob = bytes.size() - kPrefix - header_len;
  if (blob != 4 * floats) {
    throw CheckpointError(Kind::length_mismatch, "parameter blob has " + std::to_string(blob) + " bytes, header declares " +
                                                     std::to_string(floats) + " floats");
  }
  const std::uint8_t* p = bytes.data() + kPrefix + header_len;
  for (auto* t : targets) {
    for (auto& v : t->values()) {
      v = get_f32(p);
      p += 4;
    }
  }
  return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(Kind::io, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::io, "short write to " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::io, "cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return parse_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace hgd
