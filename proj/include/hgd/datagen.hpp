#pragma once

// Synthetic stand-ins for real surveillance data: parametric shape datasets
// for classification, translating-square frame sequences for the motion
// gate, and ingestion of labelled image folders.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hgd/imgproc.hpp"

namespace hgd {

enum class ShapeFamily : std::size_t { bar, cross, lshape, disk, ring, corner, tee, u, x, z };

inline constexpr std::size_t kShapeFamilies = 10;
/// Family that plays the "handgun" role in binary data sets.
inline constexpr ShapeFamily kTargetFamily = ShapeFamily::lshape;

inline constexpr const char* kPositiveLabel = "handgun";
inline constexpr const char* kNegativeLabel = "background";

const char* family_name(ShapeFamily family);

/// Discrete placement of a shape: rotation, size as a fraction of half the
/// image side, and a pixel offset of the centre.
struct ShapePose {
  double angle_deg = 0.0;
  double scale = 0.7;
  int dx = 0;
  int dy = 0;
};

/// Every pose the generators draw from (5 angles x 3 scales x 7 x 7 offsets).
const std::vector<ShapePose>& shape_pose_grid();

/// Noise-free rendering: foreground 220 on background 30.
GrayImage render_shape(ShapeFamily family, const ShapePose& pose, std::size_t size);

struct DatasetSpec {
  std::size_t num_classes = 2;
  std::size_t samples_per_class = 10;
  std::size_t image_size = 32;
  double noise_stddev = 8.0;  ///< additive Gaussian noise, in gray levels
  std::uint64_t seed = 0;
};

struct LabeledSample {
  GrayImage image;
  std::size_t label = 0;
  std::string class_name;
};

struct ManifestRow {
  std::string path;  ///< relative to the dataset root
  std::size_t class_index = 0;
  std::string class_name;
};

/// Folder name of class `index` in a multi-class shape set, e.g. "c02_lshape".
std::string shape_class_name(std::size_t index);

/// One shape family per class (at most kShapeFamilies classes), random pose
/// from `shape_pose_grid`, Gaussian noise clamped to [0, 255]. Class k draws
/// from its own stream derived from (seed, k).
std::vector<LabeledSample> make_shapes_dataset(const DatasetSpec& spec);

/// Two-class set, labels sorted by name: 0 = "background" (any non-target
/// family), 1 = "handgun" (the target family). `samples_per_class` each.
std::vector<LabeledSample> make_binary_dataset(std::size_t samples_per_class, std::size_t image_size,
                                               double noise_stddev, std::uint64_t seed);

/// Writes samples as out_dir/<class_name>/NNNN.pgm plus out_dir/manifest.csv
/// ("path,class_index,class_name"). Returns the manifest rows.
std::vector<ManifestRow> write_dataset(const std::vector<LabeledSample>& samples, const std::filesystem::path& out_dir);

std::vector<ManifestRow> gen_shapes_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

/// Class subfolders of PGM/PPM files; labels are the sorted subfolder
/// indices, samples ordered by (class name, file name).
std::vector<LabeledSample> load_labeled_dir(const std::filesystem::path& dir);

/// Class names in label order, as `load_labeled_dir` assigns them.
std::vector<std::string> class_names(const std::vector<LabeledSample>& samples);

struct MotionSpec {
  std::size_t width = 64;
  std::size_t height = 48;
  std::size_t n_frames = 20;
  std::size_t object_size = 12;
  int velocity = 2;  ///< horizontal, pixels per frame
  double noise_stddev = 0.0;
  std::uint64_t seed = 0;
};

struct MotionFrame {
  GrayImage image;
  BBox truth;
};

/// Black background with a bright square (2-px vertical stripes at 255/80,
/// moving with the square) translating horizontally. The square starts 4 px
/// from the edge it moves away from and is vertically centred. Throws
/// ArgumentError if the trajectory leaves the frame.
std::vector<MotionFrame> make_motion_sequence(const MotionSpec& spec);

/// Writes frame_000001.pgm ... and truth.csv ("frame,x,y,w,h", 1-based frames).
std::vector<MotionFrame> gen_motion_sequence(const MotionSpec& spec, const std::filesystem::path& out_dir);

/// Conventional frame file name for 1-based index `frame`.
std::string frame_file_name(std::size_t frame);

}  // namespace hgd
