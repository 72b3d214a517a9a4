#include <doctest.h>

#include <cstring>

#include <json.hpp>

#include "hgd/error.hpp"
#include "hgd/models.hpp"
#include "support.hpp"

using namespace hgd;
using test::random_tensor;

namespace {

using Bytes = std::vector<std::uint8_t>;

CheckpointError::Kind parse_error_kind(const Bytes& bytes) {
  try {
    parse_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("checkpoint parsed without error");
  return CheckpointError::Kind::io;
}

struct Parts {
  nlohmann::json header;
  Bytes blob;
};

/// Independent reader for the container layout.
Parts split(const Bytes& b) {
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = (len << 8) | b[8 + static_cast<std::size_t>(i)];
  Parts p;
  p.header = nlohmann::json::parse(b.begin() + 16, b.begin() + 16 + static_cast<long>(len));
  p.blob.assign(b.begin() + 16 + static_cast<long>(len), b.end());
  return p;
}

Bytes join(const nlohmann::json& header, const Bytes& blob) {
  const std::string h = header.dump();
  Bytes out{'H', 'G', 'C', 'K', 'P', 'T', '0', '1'};
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(h.size() >> (8 * i)));
  out.insert(out.end(), h.begin(), h.end());
  out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

Network small_net() {
  Network net({1, 2, 2}, {LayerSpec::flatten(), LayerSpec::dense(4, 2), LayerSpec::softmax()});
  net.init_he(1);
  net.meta().labels = {"a", "b"};
  return net;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("detector CNN layer shapes") {
    const auto net = build_detector_cnn(2);
    const auto& s = net.output_shapes();
    CHECK(net.input_shape() == Shape{1, 32, 32});
    CHECK(s[0] == Shape{32, 32, 32});
    CHECK(s[4] == Shape{32, 16, 16});
    CHECK(s[11] == Shape{64, 8, 8});
    CHECK(s[12] == Shape{4096});
    CHECK(s[13] == Shape{1024});
    CHECK(s[15] == Shape{1024});
    CHECK(s[17] == Shape{2});
    CHECK(s.back() == Shape{2});
    CHECK(build_detector_cnn(100).num_classes() == 100);
    CHECK(build_detector_cnn(3, 3).input_shape() == Shape{3, 32, 32});
  }

  TEST_CASE("detector CNN argument validation") {
    CHECK_THROWS_AS(build_detector_cnn(1), ArgumentError);
    CHECK_THROWS_AS(build_detector_cnn(2, 2), ArgumentError);
    CHECK_THROWS_AS(build_detector_cnn(2, 1, 0, 30), ArgumentError);
    CHECK_THROWS_AS(build_mini_backbone(1), ArgumentError);
  }

  TEST_CASE("parameter count matches a hand computation") {
    const std::size_t convs = (32 * 1 * 9 + 32) + (32 * 32 * 9 + 32) + (64 * 32 * 9 + 64) + 2 * (64 * 64 * 9 + 64);
    const std::size_t dense = (4096 * 1024 + 1024) + (1024 * 1024 + 1024) + (1024 * 2 + 2);
    CHECK(convs + dense == 5348898);
    CHECK(build_detector_cnn(2).param_count() == 5348898);
    CHECK(detector_cnn_param_count(2, 1) == 5348898);
    CHECK(detector_cnn_param_count(10, 3) == build_detector_cnn(10, 3).param_count());
    CHECK(detector_cnn_param_count(10, 3) - detector_cnn_param_count(10, 1) == 2 * 32 * 9);
  }

  TEST_CASE("mini backbone") {
    const auto a = build_mini_backbone(10, 4), b = build_mini_backbone(10, 4);
    CHECK(a.num_classes() == 10);
    CHECK(a == b);
    CHECK_FALSE(a == build_mini_backbone(10, 5));
  }

  TEST_CASE("predict") {
    const auto net = build_detector_cnn(2, 1, 3);
    Rng rng(1);
    const auto x = random_tensor({1, 32, 32}, rng, 0, 1);
    const auto p = predict(net, x);
    CHECK(p.probabilities.size() == 2);
    CHECK(p.probabilities[0] + p.probabilities[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.probability == p.probabilities[p.class_index]);
    CHECK(predict(net, x) == p);
    CHECK_THROWS_AS(predict(net, Tensor({1, 16, 16})), ShapeError);
  }

  TEST_CASE("image_to_tensor scales to unit range") {
    const auto t = image_to_tensor(GrayImage(2, 1, {0, 255}));
    CHECK(t.shape() == Shape{1, 1, 2});
    CHECK(t[0] == 0.0);
    CHECK(t[1] == 1.0);
  }

  TEST_CASE("checkpoint container layout") {
    const auto net = small_net();
    const auto bytes = serialize_checkpoint(net);
    CHECK(std::memcmp(bytes.data(), "HGCKPT01", 8) == 0);
    const auto parts = split(bytes);
    CHECK(parts.header.at("version") == 1);
    CHECK(parts.header.contains("layers"));
    CHECK(parts.header.contains("shapes"));
    CHECK(parts.header.at("meta").at("labels") == nlohmann::json({"a", "b"}));
    CHECK(parts.blob.size() == 4 * (8 + 2));
    float first = 0;
    std::memcpy(&first, parts.blob.data(), 4);
    CHECK(first == static_cast<float>(net.params(1).weight[0]));
  }

  TEST_CASE("checkpoint round trip") {
    test::TempDir dir;
    auto net = build_mini_backbone(3, 9);
    net.meta().labels = {"x", "y", "z"};
    net.meta().epochs_trained = 4;
    save_checkpoint(net, dir / "a.ckpt");
    const auto loaded = load_checkpoint(dir / "a.ckpt");
    save_checkpoint(loaded, dir / "b.ckpt");
    CHECK(test::slurp(dir / "a.ckpt") == test::slurp(dir / "b.ckpt"));
    CHECK(loaded.meta().labels == net.meta().labels);
    CHECK(loaded.meta().epochs_trained == 4);
    CHECK(loaded.layers() == net.layers());
    std::size_t mismatches = 0;
    const auto as_float = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    for (auto i : net.param_layers()) {
      const auto& a = net.params(i);
      const auto& b = loaded.params(i);
      for (std::size_t k = 0; k < a.weight.size(); ++k) mismatches += b.weight[k] != as_float(a.weight[k]);
      for (std::size_t k = 0; k < a.bias.size(); ++k) mismatches += b.bias[k] != as_float(a.bias[k]);
    }
    CHECK(mismatches == 0);
    Rng rng(2);
    for (int probe = 0; probe < 5; ++probe) {
      const auto x = random_tensor({1, 32, 32}, rng, 0, 1);
      const auto pa = predict(net, x), pb = predict(loaded, x);
      CHECK(pa.class_index == pb.class_index);
      for (std::size_t k = 0; k < 3; ++k) CHECK(pa.probabilities[k] == doctest::Approx(pb.probabilities[k]).epsilon(1e-5));
    }
  }

  TEST_CASE("checkpoint keeps the trainable flags") {
    auto net = small_net();
    net.params(1).trainable = false;
    CHECK_FALSE(parse_checkpoint(serialize_checkpoint(net)).params(1).trainable);
  }

  TEST_CASE("checkpoint corruption maps to distinct error kinds") {
    using K = CheckpointError::Kind;
    const auto good = serialize_checkpoint(small_net());

    auto bad_magic = good;
    bad_magic[0] = 'X';
    CHECK(parse_error_kind(bad_magic) == K::bad_magic);

    CHECK(parse_error_kind(Bytes(good.begin(), good.begin() + 5)) == K::truncated);
    CHECK(parse_error_kind(Bytes(good.begin(), good.begin() + 20)) == K::truncated);

    auto parts = split(good);
    // 10 floats declared, 8 present
    CHECK(parse_error_kind(join(parts.header, Bytes(parts.blob.begin(), parts.blob.end() - 8))) == K::length_mismatch);
    auto extra = parts.blob;
    extra.resize(extra.size() + 4);
    CHECK(parse_error_kind(join(parts.header, extra)) == K::length_mismatch);

    auto h = parts.header;
    h["version"] = 2;
    CHECK(parse_error_kind(join(h, parts.blob)) == K::version_mismatch);

    h = parts.header;
    h.erase("layers");
    CHECK(parse_error_kind(join(h, parts.blob)) == K::bad_header);

    Bytes not_json = join(parts.header, parts.blob);
    not_json[16] = '#';
    CHECK(parse_error_kind(not_json) == K::bad_header);

    h = parts.header;
    h["shapes"][0] = nlohmann::json::array({2, 5});
    CHECK(parse_error_kind(join(h, parts.blob)) == K::length_mismatch);
  }

  TEST_CASE("loading a missing file is an io error") {
    test::TempDir dir;
    try {
      load_checkpoint(dir / "nope.ckpt");
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::io);
    }
  }
}
