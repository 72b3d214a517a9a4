#include "hgd/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hgd/datagen.hpp"
#include "hgd/error.hpp"
#include "hgd/metrics.hpp"
#include "hgd/models.hpp"

namespace hgd {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ArgumentError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ArgumentError("config: unknown key '" + where + key + "'");
  }
}

template <typename T>
void read_key(const json& obj, const char* key, T& dst) {
  if (auto it = obj.find(key); it != obj.end()) dst = it->template get<T>();
}

json train_json(const RunConfig& c) {
  return {{"epochs", c.train.epochs},
          {"lr", c.train.lr},
          {"momentum", c.train.momentum},
          {"batch_size", c.train.batch_size},
          {"shuffle", c.train.shuffle},
          {"stop_at_accuracy", c.train.stop_at_accuracy ? json(*c.train.stop_at_accuracy) : json(nullptr)},
          {"val_fraction", c.val_fraction},
          {"freeze", c.freeze}};
}

json pipeline_json(const PipelineConfig& p) {
  return {{"motion_threshold", p.motion_threshold},
          {"blur_radius", p.blur_radius},
          {"min_blob_area", p.min_blob_area},
          {"decision_threshold", p.decision_threshold},
          {"roi_size", p.roi_size},
          {"mode", to_string(p.mode)},
          {"stride", p.stride},
          {"scales", p.scales},
          {"suppression_iou", p.suppression_iou},
          {"positive_class", p.positive_class}};
}

json resolved_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"train", train_json(c)},
          {"pipeline", pipeline_json(c.pipeline)},
          {"paths",
           {{"data", c.paths.data},
            {"out", c.paths.out},
            {"checkpoint", c.paths.checkpoint},
            {"log", c.paths.log},
            {"frames", c.paths.frames},
            {"image", c.paths.image}}}};
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

std::string require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw ArgumentError(std::string(flag) + " is required");
  return value;
}

void write_train_log(const fs::path& path, const RunConfig& cfg, const TrainReport& report) {
  auto f = open_out(path);
  f << json{{"config", resolved_json(cfg)}}.dump() << '\n' << report.to_jsonl();
}

std::string default_log(const std::string& out, const char* suffix) {
  return fs::path(out).replace_extension(suffix).string();
}

struct TrainingSet {
  Dataset data;
  std::vector<std::string> labels;
  std::size_t image_size = 0;
};

TrainingSet load_training_dir(const std::string& dir) {
  const auto samples = load_labeled_dir(dir);
  const auto& first = samples.front().image;
  if (first.width != first.height || first.width % 4 != 0) {
    throw ShapeError("training images must be square with a side divisible by 4, got " +
                     std::to_string(first.width) + "x" + std::to_string(first.height));
  }
  return {to_dataset(samples), class_names(samples), first.width};
}

/// Trains and writes checkpoint + log; shared by train, pretrain and transfer.
void fit_and_save(Network& net, const Dataset& data, const RunConfig& cfg, std::ostream& out) {
  TrainConfig tc = cfg.train;
  tc.seed = mix_seed(cfg.seed, 1);
  TrainReport report;
  if (cfg.val_fraction > 0.0) {
    const auto split = stratified_split(data, 1.0 - cfg.val_fraction, mix_seed(cfg.seed, 4));
    report = train(net, split.train, &split.validation, tc);
  } else {
    report = train(net, data, nullptr, tc);
  }
  save_checkpoint(net, cfg.paths.out);
  const std::string log = cfg.paths.log.empty() ? default_log(cfg.paths.out, ".train.jsonl") : cfg.paths.log;
  write_train_log(log, cfg, report);
  out << "checkpoint: " << cfg.paths.out << '\n' << "log: " << log << '\n';
  out << "epochs: " << report.epochs() << "  final loss: " << report.loss.back()
      << "  train accuracy: " << report.train_accuracy.back() << '\n';
}

void check_train_settings(const RunConfig& cfg) {
  validate(cfg.train);
  if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0)) throw ArgumentError("val_fraction must be in [0, 1)");
}

/// Flag overrides: a setter runs only when its flag was given.
class Overrides {
 public:
  template <typename T>
  void add(CLI::App& app, const std::string& flags, const std::string& help,
           std::function<void(RunConfig&, const T&)> apply) {
    auto value = std::make_shared<T>();
    auto* opt = app.add_option(flags, *value, help);
    setters_.push_back([opt, value, apply](RunConfig& c) {
      if (opt->count() > 0) apply(c, *value);
    });
  }
  void apply(RunConfig& c) const {
    for (const auto& s : setters_) s(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> setters_;
};

void add_common(CLI::App& app, Overrides& ov, std::string& config_path) {
  app.add_option("--config", config_path, "JSON run config; flags override it");
  ov.add<std::uint64_t>(app, "--seed", "Seed for all randomness (default 0)",
                        [](RunConfig& c, const std::uint64_t& v) { c.seed = v; });
}

void add_train_flags(CLI::App& app, Overrides& ov) {
  ov.add<std::string>(app, "--data", "Labelled image directory",
                      [](RunConfig& c, const std::string& v) { c.paths.data = v; });
  ov.add<std::string>(app, "--out", "Checkpoint to write", [](RunConfig& c, const std::string& v) { c.paths.out = v; });
  ov.add<std::string>(app, "--log", "Training log (JSON lines)",
                      [](RunConfig& c, const std::string& v) { c.paths.log = v; });
  ov.add<long long>(app, "--epochs", "Training epochs", [](RunConfig& c, const long long& v) {
    if (v < 1) throw ArgumentError("--epochs must be at least 1");
    c.train.epochs = static_cast<std::size_t>(v);
  });
  ov.add<double>(app, "--lr", "Learning rate", [](RunConfig& c, const double& v) { c.train.lr = v; });
  ov.add<double>(app, "--momentum", "SGD momentum", [](RunConfig& c, const double& v) { c.train.momentum = v; });
  ov.add<std::size_t>(app, "--batch-size", "Minibatch size",
                      [](RunConfig& c, const std::size_t& v) { c.train.batch_size = v; });
  ov.add<double>(app, "--val-fraction", "Held-out fraction for validation",
                 [](RunConfig& c, const double& v) { c.val_fraction = v; });
  ov.add<double>(app, "--stop-at", "Stop once accuracy reaches this value",
                 [](RunConfig& c, const double& v) { c.train.stop_at_accuracy = v; });
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream f(path);
  if (!f) throw ArgumentError("cannot open config " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  RunConfig c;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    reject_unknown(doc, {"seed", "train", "pipeline", "paths"}, "");
    read_key(doc, "seed", c.seed);
    if (auto t = doc.find("train"); t != doc.end()) {
      reject_unknown(*t,
                     {"epochs", "lr", "momentum", "batch_size", "shuffle", "stop_at_accuracy", "val_fraction", "freeze"},
                     "train.");
      read_key(*t, "epochs", c.train.epochs);
      read_key(*t, "lr", c.train.lr);
      read_key(*t, "momentum", c.train.momentum);
      read_key(*t, "batch_size", c.train.batch_size);
      read_key(*t, "shuffle", c.train.shuffle);
      if (auto s = t->find("stop_at_accuracy"); s != t->end() && !s->is_null()) c.train.stop_at_accuracy = s->get<double>();
      read_key(*t, "val_fraction", c.val_fraction);
      read_key(*t, "freeze", c.freeze);
    }
    if (auto p = doc.find("pipeline"); p != doc.end()) {
      reject_unknown(*p,
                     {"motion_threshold", "blur_radius", "min_blob_area", "decision_threshold", "roi_size", "mode",
                      "stride", "scales", "suppression_iou", "positive_class"},
                     "pipeline.");
      auto& q = c.pipeline;
      read_key(*p, "motion_threshold", q.motion_threshold);
      read_key(*p, "blur_radius", q.blur_radius);
      read_key(*p, "min_blob_area", q.min_blob_area);
      read_key(*p, "decision_threshold", q.decision_threshold);
      read_key(*p, "roi_size", q.roi_size);
      if (auto m = p->find("mode"); m != p->end()) q.mode = detect_mode_from_string(m->get<std::string>());
      read_key(*p, "stride", q.stride);
      read_key(*p, "scales", q.scales);
      read_key(*p, "suppression_iou", q.suppression_iou);
      read_key(*p, "positive_class", q.positive_class);
    }
    if (auto p = doc.find("paths"); p != doc.end()) {
      reject_unknown(*p, {"data", "out", "checkpoint", "log", "frames", "image"}, "paths.");
      read_key(*p, "data", c.paths.data);
      read_key(*p, "out", c.paths.out);
      read_key(*p, "checkpoint", c.paths.checkpoint);
      read_key(*p, "log", c.paths.log);
      read_key(*p, "frames", c.paths.frames);
      read_key(*p, "image", c.paths.image);
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("config has a wrongly typed value: ") + e.what());
  }
  return c;
}

std::string to_json(const RunConfig& cfg) { return resolved_json(cfg).dump(); }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Motion-gated CNN handgun detection toolkit", "hgdetect"};
  app.require_subcommand(1);

  std::string config_path;
  std::function<void(RunConfig&)> action;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset or frame sequence");
  Overrides gen_ov;
  std::string kind = "shapes";
  DatasetSpec ds;
  MotionSpec ms;
  add_common(*gen, gen_ov, config_path);
  gen_ov.add<std::string>(*gen, "--out", "Output directory", [](RunConfig& c, const std::string& v) { c.paths.out = v; });
  gen->add_option("--kind", kind, "shapes | binary | motion")->check(CLI::IsMember({"shapes", "binary", "motion"}));
  gen->add_option("--classes", ds.num_classes, "Number of shape classes (shapes)");
  gen->add_option("--per-class", ds.samples_per_class, "Samples per class");
  gen->add_option("--size", ds.image_size, "Image side in pixels");
  auto* noise_opt = gen->add_option("--noise", ds.noise_stddev, "Gaussian noise stddev in gray levels");
  gen->add_option("--frames", ms.n_frames, "Frame count (motion)");
  gen->add_option("--width", ms.width, "Frame width (motion)");
  gen->add_option("--height", ms.height, "Frame height (motion)");
  gen->add_option("--object-size", ms.object_size, "Square side (motion)");
  gen->add_option("--velocity", ms.velocity, "Horizontal pixels per frame, 0 for a static scene (motion)");
  gen->callback([&] {
    action = [&](RunConfig& c) {
      gen_ov.apply(c);
      const fs::path dir = require_path(c.paths.out, "--out");
      if (kind == "motion") {
        ms.seed = c.seed;
        ms.noise_stddev = noise_opt->count() > 0 ? ds.noise_stddev : 0.0;
        gen_motion_sequence(ms, dir);
        out << (dir / "truth.csv").string() << '\n';
        return;
      }
      ds.seed = c.seed;
      if (kind == "shapes") {
        gen_shapes_dataset(ds, dir);
      } else {
        write_dataset(make_binary_dataset(ds.samples_per_class, ds.image_size, ds.noise_stddev, ds.seed), dir);
      }
      out << (dir / "manifest.csv").string() << '\n';
    };
  });

  // train / pretrain: fresh network on a labelled directory.
  Overrides train_ov;
  auto fresh = [&](RunConfig& c) {
    train_ov.apply(c);
    check_train_settings(c);
    require_path(c.paths.data, "--data");
    require_path(c.paths.out, "--out");
    auto d = load_training_dir(c.paths.data);
    Network net = build_detector_cnn(d.labels.size(), 1, c.seed, d.image_size);
    net.meta().labels = d.labels;
    fit_and_save(net, d.data, c, out);
  };
  for (const char* name : {"train", "pretrain"}) {
    auto* sub = app.add_subcommand(name, std::string(name) == "train" ? "Train a classifier from scratch"
                                                                      : "Pretrain a multi-class backbone");
    add_common(*sub, train_ov, config_path);
    add_train_flags(*sub, train_ov);
    sub->callback([&] { action = fresh; });
  }

  // transfer
  auto* tr = app.add_subcommand("transfer", "Replace the head of a pretrained checkpoint and fine-tune");
  Overrides tr_ov;
  add_common(*tr, tr_ov, config_path);
  add_train_flags(*tr, tr_ov);
  tr_ov.add<std::string>(*tr, "--from", "Pretrained checkpoint",
                         [](RunConfig& c, const std::string& v) { c.paths.checkpoint = v; });
  tr_ov.add<std::size_t>(*tr, "--freeze", "Leading parameterised layers to freeze",
                         [](RunConfig& c, const std::size_t& v) { c.freeze = v; });
  tr->callback([&] {
    action = [&](RunConfig& c) {
      tr_ov.apply(c);
      check_train_settings(c);
      require_path(c.paths.data, "--data");
      require_path(c.paths.out, "--out");
      const Network base = load_checkpoint(require_path(c.paths.checkpoint, "--from"));
      auto d = load_training_dir(c.paths.data);
      if (base.input_shape() != Shape{1, d.image_size, d.image_size}) {
        throw ShapeError("checkpoint input " + shape_str(base.input_shape()) + " does not match " +
                         std::to_string(d.image_size) + "x" + std::to_string(d.image_size) + " training images");
      }
      Network net = replace_head(base, d.labels.size(), mix_seed(c.seed, 3));
      net.meta().labels = d.labels;
      net.meta().seed = c.seed;
      set_trainable(net, c.freeze);
      fit_and_save(net, d.data, c, out);
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint, raw counts or prediction pairs");
  Overrides ev_ov;
  add_common(*ev, ev_ov, config_path);
  std::optional<std::size_t> tp, fn, tn, fp;
  std::string pairs, json_out, model_name = "model";
  ev_ov.add<std::string>(*ev, "--checkpoint", "Checkpoint to evaluate",
                         [](RunConfig& c, const std::string& v) { c.paths.checkpoint = v; });
  ev_ov.add<std::string>(*ev, "--data", "Labelled test directory",
                         [](RunConfig& c, const std::string& v) { c.paths.data = v; });
  ev_ov.add<std::size_t>(*ev, "--positive-class", "Index of the positive class",
                         [](RunConfig& c, const std::size_t& v) { c.pipeline.positive_class = v; });
  ev->add_option("--tp", tp, "True positives (counts mode)");
  ev->add_option("--fn", fn, "False negatives (counts mode)");
  ev->add_option("--tn", tn, "True negatives (counts mode)");
  ev->add_option("--fp", fp, "False positives (counts mode)");
  ev->add_option("--pairs", pairs, "CSV of pred,label rows");
  ev->add_option("--json", json_out, "Write the metric row as JSON here");
  ev->add_option("--name", model_name, "Model name in the table");
  ev->callback([&] {
    action = [&](RunConfig& c) {
      ev_ov.apply(c);
      ConfusionMatrix cm;
      const int counts_given = !!tp + !!fn + !!tn + !!fp;
      if (counts_given > 0) {
        if (counts_given != 4) throw ArgumentError("counts mode needs all of --tp --fn --tn --fp");
        cm = {*tp, *fn, *tn, *fp};
      } else if (!pairs.empty()) {
        const auto [p, l] = read_pairs_csv(pairs);
        cm = from_pairs(p, l, c.pipeline.positive_class);
      } else {
        const Network net = load_checkpoint(require_path(c.paths.checkpoint, "--checkpoint"));
        const auto samples = load_labeled_dir(require_path(c.paths.data, "--data"));
        const auto data = to_dataset(samples);
        std::vector<std::size_t> labels;
        for (const auto& s : data) {
          if (s.label >= net.num_classes()) {
            throw ShapeError("test set has more classes than the " + std::to_string(net.num_classes()) +
                             "-class checkpoint");
          }
          labels.push_back(s.label);
        }
        cm = from_pairs(predict_labels(net, data), labels, c.pipeline.positive_class);
      }
      const std::vector<MetricRow> rows{make_metric_row(model_name, cm)};
      out << render_table(rows);
      if (!json_out.empty()) open_out(json_out) << metric_rows_to_json(rows) << '\n';
    };
  });

  // detect
  auto* det = app.add_subcommand("detect", "Run detection on a frame directory or a single image");
  Overrides det_ov;
  add_common(*det, det_ov, config_path);
  det_ov.add<std::string>(*det, "--checkpoint", "Classifier checkpoint",
                          [](RunConfig& c, const std::string& v) { c.paths.checkpoint = v; });
  det_ov.add<std::string>(*det, "--frames", "Directory of frame_NNNNNN.pgm files",
                          [](RunConfig& c, const std::string& v) { c.paths.frames = v; });
  det_ov.add<std::string>(*det, "--image", "Single image (sliding mode)",
                          [](RunConfig& c, const std::string& v) { c.paths.image = v; });
  det_ov.add<std::string>(*det, "--log", "Event log (JSON lines); stdout if omitted",
                          [](RunConfig& c, const std::string& v) { c.paths.log = v; });
  det_ov.add<std::string>(*det, "--mode", "region | sliding",
                          [](RunConfig& c, const std::string& v) { c.pipeline.mode = detect_mode_from_string(v); });
  det_ov.add<double>(*det, "--threshold", "Decision threshold",
                     [](RunConfig& c, const double& v) { c.pipeline.decision_threshold = v; });
  det_ov.add<std::size_t>(*det, "--stride", "Sliding-window stride",
                          [](RunConfig& c, const std::size_t& v) { c.pipeline.stride = v; });
  det_ov.add<std::size_t>(*det, "--positive-class", "Index of the target class",
                          [](RunConfig& c, const std::size_t& v) { c.pipeline.positive_class = v; });
  det->callback([&] {
    action = [&](RunConfig& c) {
      det_ov.apply(c);
      validate(c.pipeline);
      const bool sliding = c.pipeline.mode == DetectMode::sliding_window;
      if (sliding) require_path(c.paths.image, "--image");
      else require_path(c.paths.frames, "--frames");
      const Network net = load_checkpoint(require_path(c.paths.checkpoint, "--checkpoint"));

      std::ofstream file;
      if (!c.paths.log.empty()) file = open_out(c.paths.log);
      std::ostream& log = c.paths.log.empty() ? out : file;
      log << json{{"config", resolved_json(c)}}.dump() << '\n';

      if (sliding) {
        RoiClassifier classifier(net, c.pipeline.positive_class);
        const auto events = sliding_window_detect(read_gray(c.paths.image), classifier, c.pipeline);
        for (const auto& e : events) log << to_json_line(e) << '\n';
        out << "windows classified: " << classifier.invocations() << '\n' << "events: " << events.size() << '\n';
        return;
      }
      const auto s = run_stream(c.paths.frames, net, c.pipeline, log);
      out << "frames: " << s.frames << '\n'
          << "gate passes: " << s.gate_passes << '\n'
          << "events: " << s.events << '\n'
          << "classifier invocations: " << s.classifier_invocations << '\n';
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    for (auto* sub : app.get_subcommands()) err << sub->help();
    if (app.get_subcommands().empty()) err << app.help();
    return kExitUsage;
  }

  try {
    RunConfig cfg = load_config(config_path);
    action(cfg);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace hgd
