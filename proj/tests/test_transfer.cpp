#include <doctest.h>

#include <json.hpp>

#include "hgd/error.hpp"
#include "hgd/models.hpp"
#include "hgd/transfer.hpp"
#include "support.hpp"

using namespace hgd;

namespace {

/// Two separable classes of 8x8 inputs: bright top half vs bright bottom half.
Dataset halves(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const std::size_t label = i % 2;
    Tensor x({1, 8, 8});
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t c = 0; c < 8; ++c) x[y * 8 + c] = ((y < 4) == (label == 0) ? 0.8 : 0.1) + 0.1 * rng.uniform();
    }
    d.push_back({x, label});
  }
  return d;
}

bool same_params(const LayerParams& a, const LayerParams& b) {
  return a.weight == b.weight && a.bias == b.bias;
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 4;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("transfer") {
  TEST_CASE("train config validation") {
    TrainConfig c;
    c.epochs = 0;
    CHECK_THROWS_AS(validate(c), ArgumentError);
    c = {};
    c.batch_size = 0;
    CHECK_THROWS_AS(validate(c), ArgumentError);
    c = {};
    c.momentum = 1.0;
    CHECK_THROWS_AS(validate(c), ArgumentError);
    c = {};
    c.lr = 0.0;
    CHECK_THROWS_AS(validate(c), ArgumentError);
  }

  TEST_CASE("train rejects bad data") {
    auto net = build_detector_cnn(2, 1, 1, 8);
    auto data = halves(2, 1);
    data[0].label = 2;
    CHECK_THROWS_AS(train(net, data, nullptr, quick(1)), ArgumentError);
    Dataset wrong{{Tensor({1, 4, 4}), 0}};
    CHECK_THROWS_AS(train(net, wrong, nullptr, quick(1)), ShapeError);
    CHECK_THROWS_AS(train(net, Dataset{}, nullptr, quick(1)), ArgumentError);
  }

  TEST_CASE("same seed gives bitwise-identical training") {
    const auto data = halves(6, 2);
    auto a = build_detector_cnn(2, 1, 4, 8), b = build_detector_cnn(2, 1, 4, 8);
    const auto ra = train(a, data, nullptr, quick(3));
    const auto rb = train(b, data, nullptr, quick(3));
    CHECK(a == b);
    CHECK(ra.loss == rb.loss);
    CHECK(a.meta().epochs_trained == 3);
  }

  TEST_CASE("loss falls and the set is fitted") {
    const auto data = halves(8, 3);
    auto net = build_detector_cnn(2, 1, 5, 8);
    const auto r = train(net, data, nullptr, quick(15));
    CHECK(r.loss.back() < r.loss.front());
    CHECK(r.train_accuracy.back() == 1.0);
    CHECK(accuracy(net, data) == 1.0);
  }

  TEST_CASE("early stop on accuracy") {
    const auto data = halves(8, 3);
    auto net = build_detector_cnn(2, 1, 5, 8);
    auto cfg = quick(50);
    cfg.stop_at_accuracy = 1.0;
    const auto r = train(net, data, nullptr, cfg);
    CHECK(r.epochs() < 50);
    CHECK(r.train_accuracy.back() == 1.0);
    CHECK(r.epochs_to_target(1.0) == r.epochs());
  }

  TEST_CASE("train report helpers") {
    TrainReport r;
    r.loss = {1.0, 0.5, 0.2};
    r.train_accuracy = {0.5, 0.96, 1.0};
    CHECK(r.epochs_to_target(0.95) == 2u);
    r.val_accuracy = {0.5, 0.9, 0.95};
    CHECK(r.epochs_to_target(0.95) == 3u);
    CHECK_FALSE(r.epochs_to_target(0.99).has_value());
    const auto lines = r.to_jsonl();
    const auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
    CHECK(first["epoch"] == 1);
    CHECK(first["val_acc"] == 0.5);
    TrainReport no_val;
    no_val.loss = {1.0};
    no_val.train_accuracy = {0.5};
    CHECK(nlohmann::json::parse(no_val.to_jsonl())["val_acc"].is_null());
  }

  TEST_CASE("stratified split") {
    const auto data = halves(10, 4);
    const auto s = stratified_split(data, 0.8, 9);
    CHECK(s.train.size() == 16);
    CHECK(s.validation.size() == 4);
    std::size_t val_pos = 0;
    for (const auto& x : s.validation) val_pos += x.label;
    CHECK(val_pos == 2);
    const auto again = stratified_split(data, 0.8, 9);
    for (std::size_t i = 0; i < s.train.size(); ++i) CHECK(s.train[i].input == again.train[i].input);
    CHECK_THROWS_AS(stratified_split(data, 0.0, 1), ArgumentError);
  }

  TEST_CASE("replace_head keeps every non-head parameter") {
    auto donor = build_detector_cnn(10, 1, 7, 8);
    donor.meta().labels = std::vector<std::string>(10, "c");
    const auto net = replace_head(donor, 2, 99);
    CHECK(net.num_classes() == 2);
    CHECK(net.forward(Tensor({1, 8, 8}, 0.5)).size() == 2);
    const auto layers = net.param_layers();
    for (std::size_t j = 0; j + 1 < layers.size(); ++j) CHECK(same_params(net.params(layers[j]), donor.params(layers[j])));
    CHECK(net.meta().labels.empty());

    const auto same_count = replace_head(donor, 10, 99);
    for (std::size_t j = 0; j + 1 < layers.size(); ++j) {
      CHECK(same_params(same_count.params(layers[j]), donor.params(layers[j])));
    }
    CHECK_FALSE(same_params(same_count.params(layers.back()), donor.params(layers.back())));
    CHECK(replace_head(donor, 2, 99) == net);

    Network headless({1, 2, 2}, {LayerSpec::flatten(), LayerSpec::softmax()});
    CHECK_THROWS_AS(replace_head(headless, 2, 1), ArgumentError);
  }

  TEST_CASE("set_trainable") {
    const auto data = halves(4, 5);
    auto net = build_detector_cnn(2, 1, 6, 8);
    const std::size_t n = net.param_layers().size();

    set_trainable(net, 0);
    for (auto i : net.param_layers()) CHECK(net.params(i).trainable);

    set_trainable(net, n);
    const auto frozen = net;
    train(net, data, nullptr, quick(2));
    for (auto i : net.param_layers()) CHECK(same_params(net.params(i), frozen.params(i)));

    set_trainable(net, n - 1);
    const auto before = net;
    train(net, data, nullptr, quick(1));
    const auto layers = net.param_layers();
    for (std::size_t j = 0; j + 1 < n; ++j) CHECK(same_params(net.params(layers[j]), before.params(layers[j])));
    CHECK_FALSE(same_params(net.params(layers.back()), before.params(layers.back())));

    CHECK_THROWS_AS(set_trainable(net, n + 1), ArgumentError);
  }

  TEST_CASE("transfer_experiment bookkeeping") {
    const auto pre = to_dataset(make_shapes_dataset({3, 3, 32, 8.0, 1}));
    const auto bin = to_dataset(make_binary_dataset(5, 32, 8.0, 2));
    TransferConfig cfg;
    cfg.pretrain = quick(1);
    cfg.finetune = quick(2);
    cfg.stop_at_target = false;
    CHECK_THROWS_AS(transfer_experiment(pre, bin, cfg, {}), ArgumentError);

    const auto a = transfer_experiment(pre, bin, cfg, {11});
    REQUIRE(a.runs.size() == 1);
    CHECK(a.runs[0].pretrain.epochs() == 1);
    CHECK(a.runs[0].transfer.epochs() == 2);
    CHECK(a.runs[0].scratch.epochs() == 2);
    CHECK(a.runs[0].transfer.val_accuracy.size() == 2);
    CHECK(a.runs[0].scratch.val_accuracy.size() == 2);
    CHECK(transfer_experiment(pre, bin, cfg, {11}).to_json() == a.to_json());
    const auto j = nlohmann::json::parse(a.to_json());
    CHECK(j["runs"][0]["seed"] == 11);
  }

  TEST_CASE("comparison medians treat never-reached as slowest") {
    TransferComparison c;
    SeedOutcome a, b, d;
    a.transfer_epochs = 1;
    a.scratch_epochs = 3;
    b.transfer_epochs = 2;
    b.scratch_epochs = std::nullopt;
    d.transfer_epochs = 4;
    d.scratch_epochs = 4;
    c.runs = {a, b, d};
    CHECK(c.median_transfer_epochs() == 2.0);
    CHECK(c.median_scratch_epochs() == 4.0);
    CHECK(c.transfer_strict_wins() == 2);
  }
}
