#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "hgd/cli.hpp"
#include "hgd/datagen.hpp"
#include "hgd/error.hpp"
#include "hgd/models.hpp"
#include "support.hpp"

using namespace hgd;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_pgm(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.path().extension() == ".pgm";
  return n;
}

bool contains(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen-data writes classes x per-class images, byte-identically per seed") {
    test::TempDir a, b;
    auto run_a = cli({"gen-data", "--classes", "10", "--per-class", "50", "--seed", "7", "--out", a.path().string()});
    REQUIRE(run_a.code == kExitOk);
    CHECK(count_pgm(a.path()) == 500);
    CHECK(cli({"gen-data", "--classes", "10", "--per-class", "50", "--seed", "7", "--out", b.path().string()}).code ==
          kExitOk);
    const std::string manifest = test::slurp(a / "manifest.csv");
    CHECK(manifest == test::slurp(b / "manifest.csv"));
    for (const auto& e : fs::recursive_directory_iterator(a.path())) {
      if (e.is_regular_file()) CHECK(test::slurp(e.path()) == test::slurp(b.path() / fs::relative(e.path(), a.path())));
    }
  }

  TEST_CASE("usage errors exit with 2") {
    test::TempDir dir;
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"bogus"}).code == kExitUsage);
    CHECK(cli({"gen-data", "--classes", "2"}).code == kExitUsage);
    CHECK(cli({"gen-data", "--kind", "nope", "--out", dir.path().string()}).code == kExitUsage);
    CHECK(cli({"train", "--data", dir.path().string(), "--out", (dir / "m.ckpt").string(), "--epochs", "0"}).code ==
          kExitUsage);
    CHECK(cli({"eval", "--tp", "1", "--fn", "2"}).code == kExitUsage);
    {
      std::ofstream cfg(dir / "bad.json");
      cfg << R"({"train": {"epochs": 2, "learning_rate": 0.1}})";
    }
    const auto r = cli({"train", "--config", (dir / "bad.json").string()});
    CHECK(r.code == kExitUsage);
    CHECK(contains(r.err, "learning_rate"));
  }

  TEST_CASE("run config parsing") {
    const auto c = parse_run_config(R"({"seed": 5, "train": {"epochs": 3, "stop_at_accuracy": 0.9},
                                        "pipeline": {"mode": "sliding", "scales": [1.0]}})");
    CHECK(c.seed == 5);
    CHECK(c.train.epochs == 3);
    CHECK(c.train.stop_at_accuracy == 0.9);
    CHECK(c.pipeline.mode == DetectMode::sliding_window);
    CHECK(c.pipeline.scales == std::vector<double>{1.0});
    const auto back = parse_run_config(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK_THROWS_AS(parse_run_config(R"({"train": {"epochs": "three"}})"), ArgumentError);
    CHECK_THROWS_AS(parse_run_config("{"), ArgumentError);
    CHECK_THROWS_AS(parse_run_config(R"({"colour": 1})"), ArgumentError);
  }

  TEST_CASE("train is deterministic and transfer swaps the head") {
    test::TempDir dir;
    const auto data = (dir / "data").string();
    REQUIRE(cli({"gen-data", "--classes", "3", "--per-class", "4", "--seed", "1", "--out", data}).code == kExitOk);
    const std::vector<std::string> train_args{"pretrain", "--data", data, "--epochs", "1", "--batch-size", "4",
                                              "--seed", "2"};
    auto first = train_args, second = train_args;
    first.insert(first.end(), {"--out", (dir / "a.ckpt").string()});
    second.insert(second.end(), {"--out", (dir / "b.ckpt").string()});
    REQUIRE(cli(first).code == kExitOk);
    REQUIRE(cli(second).code == kExitOk);
    CHECK(test::slurp(dir / "a.ckpt") == test::slurp(dir / "b.ckpt"));
    const auto body = [](const std::string& log) { return log.substr(log.find('\n')); };
    CHECK(body(test::slurp(dir / "a.train.jsonl")) == body(test::slurp(dir / "b.train.jsonl")));

    const auto log = test::slurp(dir / "a.train.jsonl");
    const auto head = nlohmann::json::parse(log.substr(0, log.find('\n')));
    CHECK(head["config"]["seed"] == 2);
    CHECK(head["config"]["train"]["epochs"] == 1);

    const auto bin = (dir / "bin").string();
    REQUIRE(cli({"gen-data", "--kind", "binary", "--per-class", "4", "--out", bin}).code == kExitOk);
    REQUIRE(cli({"transfer", "--from", (dir / "a.ckpt").string(), "--data", bin, "--epochs", "1", "--freeze", "7",
                 "--out", (dir / "t.ckpt").string()})
                .code == kExitOk);
    const auto base = load_checkpoint(dir / "a.ckpt");
    const auto tuned = load_checkpoint(dir / "t.ckpt");
    CHECK(tuned.num_classes() == 2);
    CHECK(tuned.meta().labels == std::vector<std::string>{kNegativeLabel, kPositiveLabel});
    const auto layers = tuned.param_layers();
    for (std::size_t j = 0; j + 1 < layers.size(); ++j) {
      CHECK(tuned.params(layers[j]).weight == base.params(layers[j]).weight);
    }

    const auto eval = cli({"eval", "--checkpoint", (dir / "t.ckpt").string(), "--data", bin});
    CHECK(eval.code == kExitOk);
    CHECK(contains(eval.out, "F1"));
  }

  TEST_CASE("eval from counts and pairs") {
    const auto a = cli({"eval", "--tp", "272", "--fn", "32", "--tn", "255", "--fp", "49", "--name", "AlexNet"});
    REQUIRE(a.code == kExitOk);
    for (const char* s : {"AlexNet", "84.74", "89.47", "87.04", "86.68"}) CHECK(contains(a.out, s));
    const auto b = cli({"eval", "--tp", "304", "--fn", "0", "--tn", "247", "--fp", "57"});
    for (const char* s : {"84.21", "100.00", "91.43"}) CHECK(contains(b.out, s));

    test::TempDir dir;
    {
      std::ofstream f(dir / "pairs.csv");
      f << "pred,label\n1,1\n0,0\n1,1\n0,0\n";
    }
    const auto json_path = (dir / "m.json").string();
    const auto p = cli({"eval", "--pairs", (dir / "pairs.csv").string(), "--json", json_path});
    REQUIRE(p.code == kExitOk);
    const auto j = nlohmann::json::parse(test::slurp(json_path));
    CHECK(j[0]["precision"] == 1.0);
    CHECK(j[0]["recall"] == 1.0);
    CHECK(j[0]["accuracy"] == 1.0);
    CHECK(contains(p.out, "100.00"));
  }

  TEST_CASE("detect on streams and stills") {
    test::TempDir dir;
    auto net = test::tiny_patch_net(3);
    net.meta().labels = {kNegativeLabel, kPositiveLabel};
    save_checkpoint(net, dir / "net.ckpt");
    const auto ckpt = (dir / "net.ckpt").string();

    const auto still = (dir / "still").string();
    REQUIRE(cli({"gen-data", "--kind", "motion", "--velocity", "0", "--frames", "6", "--out", still}).code == kExitOk);
    const auto s = cli({"detect", "--checkpoint", ckpt, "--frames", still, "--log", (dir / "ev.jsonl").string()});
    REQUIRE(s.code == kExitOk);
    CHECK(contains(s.out, "frames: 6"));
    CHECK(contains(s.out, "gate passes: 0"));
    CHECK(contains(s.out, "classifier invocations: 0"));
    const auto log = test::slurp(dir / "ev.jsonl");
    CHECK(std::count(log.begin(), log.end(), '\n') == 1);
    CHECK(nlohmann::json::parse(log).contains("config"));

    const auto moving = (dir / "moving").string();
    REQUIRE(cli({"gen-data", "--kind", "motion", "--frames", "8", "--out", moving}).code == kExitOk);
    const auto m = cli({"detect", "--checkpoint", ckpt, "--frames", moving, "--threshold", "1.0"});
    REQUIRE(m.code == kExitOk);
    CHECK(contains(m.out, "gate passes: 6"));

    write_pnm(dir / "img.pgm", GrayImage(64, 48, 30));
    const auto w = cli({"detect", "--mode", "sliding", "--checkpoint", ckpt, "--image", (dir / "img.pgm").string(),
                        "--stride", "16", "--log", (dir / "w.jsonl").string()});
    REQUIRE(w.code == kExitOk);
    CHECK(contains(w.out, "windows classified: 8"));

    {
      std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
      bad << "not a checkpoint";
    }
    const auto f = cli({"detect", "--checkpoint", (dir / "bad.ckpt").string(), "--frames", moving});
    CHECK(f.code == kExitFailure);
    CHECK(contains(f.err, "bad.ckpt"));
    CHECK(cli({"detect", "--checkpoint", ckpt, "--frames", (dir / "none").string()}).code == kExitFailure);
  }
}
