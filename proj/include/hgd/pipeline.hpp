#pragma once

// Frame acquisition -> motion gate -> ROI extraction -> classification ->
// detection events, plus an exhaustive sliding-window mode for still images.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hgd/imgproc.hpp"
#include "hgd/models.hpp"

namespace hgd {

enum class DetectMode { region_proposals, sliding_window };

const char* to_string(DetectMode mode);
DetectMode detect_mode_from_string(const std::string& name);

struct PipelineConfig {
  std::uint8_t motion_threshold = 25;
  std::size_t blur_radius = 1;
  std::size_t min_blob_area = 50;
  double decision_threshold = 0.5;  ///< theta: minimum positive-class probability for an event
  std::size_t roi_size = kPatchSize;
  DetectMode mode = DetectMode::region_proposals;
  std::size_t stride = 8;
  std::vector<double> scales{1.0, 0.75, 0.5};
  double suppression_iou = 0.5;
  std::size_t positive_class = 1;
};

/// Throws ArgumentError on out-of-range settings.
void validate(const PipelineConfig& cfg);

struct DetectionEvent {
  std::size_t frame = 0;
  BBox box;
  double probability = 0.0;
  std::string label;
};

/// {"frame","x","y","w","h","prob","label"}
std::string to_json_line(const DetectionEvent& e);

struct GateResult {
  bool warming_up = true;
  std::vector<BBox> boxes;  ///< blobs at the middle frame; empty means no motion
};

/// The three most recent frames (t-1, t, t+1), stored blurred for
/// differencing plus the raw middle frame for classification.
class FrameRing {
 public:
  /// Pushes a frame and, once three are buffered, runs the motion gate.
  GateResult feed(const GrayImage& frame, const PipelineConfig& cfg);

  std::size_t frames_seen() const { return seen_; }
  /// Raw frame at time t, i.e. the one the latest gate result refers to.
  const GrayImage& middle() const;
  /// 1-based index of `middle()` in the stream.
  std::size_t middle_index() const { return seen_ - 1; }

 private:
  std::deque<GrayImage> raw_;
  std::deque<GrayImage> blurred_;
  std::size_t seen_ = 0;
};

/// Wraps a network for patch classification and counts invocations.
class RoiClassifier {
 public:
  RoiClassifier(const Network& net, std::size_t positive_class);

  /// Positive-class probability for a patch matching the network input.
  double positive_probability(const GrayImage& patch);
  std::size_t invocations() const { return invocations_; }
  const std::string& label() const { return label_; }
  std::size_t patch_size() const { return net_.input_shape().at(1); }

 private:
  const Network& net_;
  std::size_t positive_;
  std::string label_;
  std::size_t invocations_ = 0;
};

/// Resizes each box to the classifier input and emits an event when the
/// positive-class probability is at least the decision threshold.
std::vector<DetectionEvent> classify_rois(const GrayImage& frame, std::size_t frame_index,
                                          const std::vector<BBox>& boxes, RoiClassifier& classifier,
                                          const PipelineConfig& cfg);

/// Greedy suppression: highest probability first, dropping any event whose
/// IoU with an already kept one exceeds `iou_threshold`.
std::vector<DetectionEvent> suppress_overlaps(std::vector<DetectionEvent> events, double iou_threshold);

/// Multi-scale exhaustive scan. Windows are reported in original image
/// coordinates; scales at which the window no longer fits are skipped.
/// Throws ShapeError if the window is larger than the image itself.
std::vector<DetectionEvent> sliding_window_detect(const GrayImage& image, RoiClassifier& classifier,
                                                  const PipelineConfig& cfg, std::size_t frame_index = 0);

struct StreamSummary {
  std::size_t frames = 0;
  std::size_t gate_passes = 0;
  std::size_t events = 0;
  std::size_t classifier_invocations = 0;
};

/// frame_000001.pgm, frame_000002.pgm, ... in order. Throws IoError if the
/// directory holds no frames or the numbering has a gap.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

/// Replays a frame directory through the gate and classifier, writing one
/// JSON line per event to `log`.
StreamSummary run_stream(const std::filesystem::path& frame_dir, const Network& net, const PipelineConfig& cfg,
                         std::ostream& log);

}  // namespace hgd
