#include "hgd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <regex>

#include <json.hpp>

#include "hgd/datagen.hpp"
#include "hgd/error.hpp"

namespace hgd {

namespace fs = std::filesystem;

const char* to_string(DetectMode mode) {
  return mode == DetectMode::sliding_window ? "sliding_window" : "region_proposals";
}

DetectMode detect_mode_from_string(const std::string& name) {
  if (name == "region_proposals" || name == "region") return DetectMode::region_proposals;
  if (name == "sliding_window" || name == "sliding") return DetectMode::sliding_window;
  throw ArgumentError("unknown detection mode '" + name + "'");
}

void validate(const PipelineConfig& cfg) {
  if (!(cfg.decision_threshold > 0.0 && cfg.decision_threshold <= 1.0)) {
    throw ArgumentError("decision threshold must be in (0, 1]");
  }
  if (cfg.roi_size == 0) throw ArgumentError("ROI size must be positive");
  if (cfg.stride == 0) throw ArgumentError("sliding-window stride must be at least 1");
  if (cfg.mode == DetectMode::sliding_window && cfg.scales.empty()) {
    throw ArgumentError("sliding-window mode needs at least one scale");
  }
  for (double s : cfg.scales) {
    if (!(s > 0.0)) throw ArgumentError("sliding-window scales must be positive");
  }
  if (!(cfg.suppression_iou >= 0.0 && cfg.suppression_iou <= 1.0)) {
    throw ArgumentError("suppression IoU must be in [0, 1]");
  }
}

std::string to_json_line(const DetectionEvent& e) {
  return nlohmann::json{{"frame", e.frame}, {"x", e.box.x},           {"y", e.box.y},       {"w", e.box.w},
                        {"h", e.box.h},     {"prob", e.probability}, {"label", e.label}}
      .dump();
}

GateResult FrameRing::feed(const GrayImage& frame, const PipelineConfig& cfg) {
  if (!raw_.empty() && (frame.width != raw_.back().width || frame.height != raw_.back().height)) {
    throw ShapeError("frame " + std::to_string(seen_ + 1) + " is " + std::to_string(frame.width) + "x" +
                     std::to_string(frame.height) + ", stream is " + std::to_string(raw_.back().width) + "x" +
                     std::to_string(raw_.back().height));
  }
  raw_.push_back(frame);
  blurred_.push_back(box_blur(frame, cfg.blur_radius));
  if (raw_.size() > 3) {
    raw_.pop_front();
    blurred_.pop_front();
  }
  ++seen_;
  GateResult result;
  if (raw_.size() < 3) return result;
  result.warming_up = false;
  const auto mask = triple_diff(blurred_[0], blurred_[1], blurred_[2], cfg.motion_threshold);
  result.boxes = connected_components(mask, cfg.min_blob_area);
  return result;
}

const GrayImage& FrameRing::middle() const {
  if (raw_.size() < 3) throw ArgumentError("FrameRing: fewer than three frames buffered");
  return raw_[1];
}

RoiClassifier::RoiClassifier(const Network& net, std::size_t positive_class) : net_(net), positive_(positive_class) {
  const auto& in = net.input_shape();
  if (in.at(0) != 1 || in.at(1) != in.at(2)) {
    throw ShapeError("ROI classifier needs a square single-channel network, got input " + shape_str(in));
  }
  if (positive_class >= net.num_classes()) {
    throw ArgumentError("positive class " + std::to_string(positive_class) + " is outside the " +
                        std::to_string(net.num_classes()) + "-class head");
  }
  const auto& labels = net.meta().labels;
  label_ = positive_class < labels.size() ? labels[positive_class] : "class" + std::to_string(positive_class);
}

double RoiClassifier::positive_probability(const GrayImage& patch) {
  ++invocations_;
  return predict(net_, image_to_tensor(patch)).probabilities.at(positive_);
}

std::vector<DetectionEvent> classify_rois(const GrayImage& frame, std::size_t frame_index,
                                          const std::vector<BBox>& boxes, RoiClassifier& classifier,
                                          const PipelineConfig& cfg) {
  std::vector<DetectionEvent> events;
  const std::size_t side = classifier.patch_size();
  for (const auto& box : boxes) {
    const double p = classifier.positive_probability(roi_resize(frame, box, side, side));
    if (p >= cfg.decision_threshold) events.push_back({frame_index, box, p, classifier.label()});
  }
  return events;
}

std::vector<DetectionEvent> suppress_overlaps(std::vector<DetectionEvent> events, double iou_threshold) {
  std::stable_sort(events.begin(), events.end(),
                   [](const DetectionEvent& a, const DetectionEvent& b) { return a.probability > b.probability; });
  std::vector<DetectionEvent> kept;
  for (auto& e : events) {
    const bool overlaps = std::any_of(kept.begin(), kept.end(),
                                      [&](const DetectionEvent& k) { return iou(k.box, e.box) > iou_threshold; });
    if (!overlaps) kept.push_back(std::move(e));
  }
  return kept;
}

std::vector<DetectionEvent> sliding_window_detect(const GrayImage& image, RoiClassifier& classifier,
                                                  const PipelineConfig& cfg, std::size_t frame_index) {
  validate(cfg);
  const std::size_t win = classifier.patch_size();
  if (win > image.width || win > image.height) {
    throw ShapeError("sliding window " + std::to_string(win) + "x" + std::to_string(win) + " is larger than the " +
                     std::to_string(image.width) + "x" + std::to_string(image.height) + " image");
  }
  std::vector<DetectionEvent> events;
  for (double scale : cfg.scales) {
    const auto sw = static_cast<std::size_t>(std::lround(static_cast<double>(image.width) * scale));
    const auto sh = static_cast<std::size_t>(std::lround(static_cast<double>(image.height) * scale));
    if (sw < win || sh < win) continue;
    const GrayImage scaled = (sw == image.width && sh == image.height) ? image : resize(image, sw, sh);
    for (std::size_t y = 0; y + win <= sh; y += cfg.stride) {
      for (std::size_t x = 0; x + win <= sw; x += cfg.stride) {
        const BBox window{x, y, win, win, win * win};
        const double p = classifier.positive_probability(roi_resize(scaled, window, win, win));
        if (p < cfg.decision_threshold) continue;
        const auto ox = std::min(static_cast<std::size_t>(std::floor(static_cast<double>(x) / scale)), image.width - 1);
        const auto oy = std::min(static_cast<std::size_t>(std::floor(static_cast<double>(y) / scale)), image.height - 1);
        const auto side = static_cast<std::size_t>(std::lround(static_cast<double>(win) / scale));
        const std::size_t ow = std::clamp<std::size_t>(side, 1, image.width - ox);
        const std::size_t oh = std::clamp<std::size_t>(side, 1, image.height - oy);
        events.push_back({frame_index, BBox{ox, oy, ow, oh, ow * oh}, p, classifier.label()});
      }
    }
  }
  return suppress_overlaps(std::move(events), cfg.suppression_iou);
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("frame directory " + dir.string() + " does not exist");
  static const std::regex pattern(R"(frame_(\d{6})\.pgm)");
  std::vector<std::pair<std::size_t, fs::path>> found;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && std::regex_match(name, m, pattern)) found.push_back({std::stoul(m[1]), e.path()});
  }
  if (found.empty()) throw IoError("no frame_NNNNNN.pgm files in " + dir.string());
  std::sort(found.begin(), found.end());
  std::vector<fs::path> frames;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (found[i].first != i + 1) throw IoError("missing frame " + (dir / frame_file_name(i + 1)).string());
    frames.push_back(found[i].second);
  }
  return frames;
}

StreamSummary run_stream(const fs::path& frame_dir, const Network& net, const PipelineConfig& cfg,
                         std::ostream& log) {
  validate(cfg);
  const auto frames = list_frames(frame_dir);
  RoiClassifier classifier(net, cfg.positive_class);
  if (classifier.patch_size() != cfg.roi_size) {
    throw ShapeError("ROI size " + std::to_string(cfg.roi_size) + " does not match the network input " +
                     shape_str(net.input_shape()));
  }
  FrameRing ring;
  StreamSummary summary;
  for (const auto& path : frames) {
    GrayImage frame;
    try {
      frame = read_gray(path);
    } catch (const Error& e) {
      throw IoError("cannot read frame " + path.string() + ": " + e.what());
    }
    const auto gate = ring.feed(frame, cfg);
    ++summary.frames;
    if (gate.warming_up || gate.boxes.empty()) continue;
    ++summary.gate_passes;
    for (const auto& ev : classify_rois(ring.middle(), ring.middle_index(), gate.boxes, classifier, cfg)) {
      log << to_json_line(ev) << '\n';
      ++summary.events;
    }
  }
  summary.classifier_invocations = classifier.invocations();
  return summary;
}

}  // namespace hgd
