#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "hgd/error.hpp"
#include "hgd/metrics.hpp"
#include "support.hpp"

using namespace hgd;

namespace {

const ConfusionMatrix kAlexNet{272, 32, 255, 49};
const ConfusionMatrix kRow10{304, 0, 247, 57};

double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("AlexNet row from counts") {
    CHECK(std::abs(*precision(kAlexNet) - 272.0 / 321.0) < 1e-15);
    CHECK(std::abs(round4(*precision(kAlexNet)) - 0.8474) <= 1e-4);
    CHECK(std::abs(round4(*recall(kAlexNet)) - 0.8947) <= 1e-4);
    CHECK(std::abs(round4(*f1(kAlexNet)) - 0.8704) <= 1e-4);
    CHECK(std::abs(*accuracy(kAlexNet) - 0.8668) <= 0.005);
    CHECK(std::abs(*accuracy(kAlexNet) - 527.0 / 608.0) < 1e-15);
  }

  TEST_CASE("perfect-recall row from counts") {
    CHECK(std::abs(round4(*precision(kRow10)) - 0.8421) <= 1e-4);
    CHECK(*recall(kRow10) == 1.0);
    CHECK(std::abs(round4(*f1(kRow10)) - 0.9143) <= 1e-4);
  }

  TEST_CASE("plain CNN accuracy 334 of 608") {
    const ConfusionMatrix cm{167, 137, 167, 137};
    CHECK(std::abs(*accuracy(cm) - 0.5493) <= 0.005);
    CHECK(std::abs(*accuracy(cm) - 334.0 / 608.0) < 1e-15);
  }

  TEST_CASE("misprinted cells are computed from counts, not copied") {
    // Fast R-CNN: 232 true positives among 288 positive predictions.
    const ConfusionMatrix fast{232, 72, 248, 56};
    CHECK(std::abs(*precision(fast) - 232.0 / 288.0) < 1e-15);
    CHECK(std::abs(100.0 * *precision(fast) - 80.56) < 0.005);
    CHECK(std::abs(100.0 * *precision(fast) - 80.76) > 0.1);

    const ConfusionMatrix mobile{156, 54, 168, 42};
    CHECK(std::abs(100.0 * *precision(mobile) - 78.79) < 0.005);
    CHECK(std::abs(100.0 * *recall(mobile) - 74.29) < 0.005);
    CHECK(std::abs(100.0 * *f1(mobile) - 76.47) < 0.005);
  }

  TEST_CASE("degenerate matrices") {
    CHECK_FALSE(accuracy(ConfusionMatrix{}).has_value());
    CHECK_FALSE(precision(ConfusionMatrix{0, 5, 5, 0}).has_value());
    CHECK_FALSE(recall(ConfusionMatrix{0, 0, 5, 5}).has_value());
    CHECK_FALSE(f1(ConfusionMatrix{0, 0, 5, 5}).has_value());
    CHECK_FALSE(f1(ConfusionMatrix{0, 3, 5, 2}).has_value());  // P = R = 0
    CHECK(*precision(ConfusionMatrix{3, 1, 0, 0}) == 1.0);
    CHECK(*recall(ConfusionMatrix{3, 0, 0, 2}) == 1.0);
    CHECK(*accuracy(ConfusionMatrix{5, 0, 5, 0}) == 1.0);
    const ConfusionMatrix equal{6, 2, 0, 2};  // P = R = 0.75
    CHECK(*f1(equal) == doctest::Approx(0.75).epsilon(1e-15));
  }

  TEST_CASE("from_pairs examples") {
    const std::vector<std::size_t> ones(7, 1), zeros(7, 0);
    CHECK(from_pairs(ones, ones, 1) == ConfusionMatrix{7, 0, 0, 0});
    CHECK(from_pairs(zeros, ones, 1) == ConfusionMatrix{0, 7, 0, 0});
    CHECK_THROWS_AS(from_pairs(ones, std::vector<std::size_t>(3, 1), 1), ArgumentError);
  }

  TEST_CASE("random matrices: brute-force tally and metric laws") {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 50;
      std::vector<std::size_t> pred(n), lab(n);
      std::size_t tp = 0, fn = 0, tn = 0, fp = 0, correct = 0;
      for (std::size_t i = 0; i < n; ++i) {
        pred[i] = rng.uniform_int(3);
        lab[i] = rng.uniform_int(3);
        const bool p = pred[i] == 2, a = lab[i] == 2;
        tp += p && a;
        fn += !p && a;
        tn += !p && !a;
        fp += p && !a;
        correct += p == a;
      }
      const auto cm = from_pairs(pred, lab, 2);
      CHECK(cm == ConfusionMatrix{tp, fn, tn, fp});
      CHECK(*accuracy(cm) == static_cast<double>(correct) / static_cast<double>(n));
      for (const auto& m : {accuracy(cm), precision(cm), recall(cm), f1(cm)}) {
        if (m) {
          CHECK(*m >= 0.0);
          CHECK(*m <= 1.0);
        }
      }
      const auto p = precision(cm), r = recall(cm), f = f1(cm);
      if (p && r && *p > 0 && *r > 0) {
        CHECK(*f <= std::max(*p, *r) + 1e-15);
        CHECK(*f >= std::min(*p, *r) - 1e-15);
      }
    }
  }

  TEST_CASE("render_table") {
    const auto header_only = render_table({});
    CHECK(header_only.find("Model") != std::string::npos);
    CHECK(std::count(header_only.begin(), header_only.end(), '\n') == 1);
    const std::vector<MetricRow> rows{make_metric_row("AlexNet", kAlexNet), make_metric_row("empty", ConfusionMatrix{})};
    const auto text = render_table(rows);
    for (const char* s : {"84.74", "89.47", "87.04", "86.68", "n/a"}) CHECK(text.find(s) != std::string::npos);
    CHECK(render_table(rows) == text);
  }

  TEST_CASE("metric JSON uses null for undefined values") {
    const auto j = nlohmann::json::parse(metric_rows_to_json({make_metric_row("x", ConfusionMatrix{0, 0, 3, 0})}));
    CHECK(j[0]["tn"] == 3);
    CHECK(j[0]["precision"].is_null());
    CHECK(j[0]["accuracy"] == 1.0);
  }

  TEST_CASE("pairs CSV parsing") {
    const auto [p, l] = parse_pairs_csv("pred,label\n1,1\n0, 1\r\n\n1,0\n");
    CHECK(p == std::vector<std::size_t>{1, 0, 1});
    CHECK(l == std::vector<std::size_t>{1, 1, 0});
    CHECK_THROWS_AS(parse_pairs_csv("a,b\n1,1\n"), ArgumentError);
    CHECK_THROWS_AS(parse_pairs_csv("pred,label\n1;1\n"), ArgumentError);
    CHECK_THROWS_AS(parse_pairs_csv("pred,label\nx,1\n"), ArgumentError);
    CHECK_THROWS_AS(parse_pairs_csv(""), ArgumentError);
  }
}
