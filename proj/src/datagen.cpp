#include "hgd/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "hgd/error.hpp"
#include "hgd/tensor.hpp"

namespace hgd {

namespace {

namespace fs = std::filesystem;

constexpr std::uint8_t kForeground = 220;
constexpr std::uint8_t kBackground = 30;
constexpr double kStroke = 0.18;  // half stroke width in shape units

struct Point {
  double u, v;
};
struct Segment {
  Point a, b;
};

double segment_distance(Point p, const Segment& s) {
  const double du = s.b.u - s.a.u;
  const double dv = s.b.v - s.a.v;
  const double len2 = du * du + dv * dv;
  double t = len2 > 0 ? ((p.u - s.a.u) * du + (p.v - s.a.v) * dv) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double eu = p.u - (s.a.u + t * du);
  const double ev = p.v - (s.a.v + t * dv);
  return std::sqrt(eu * eu + ev * ev);
}

bool near_any(Point p, std::initializer_list<Segment> segments) {
  for (const auto& s : segments) {
    if (segment_distance(p, s) <= kStroke) return true;
  }
  return false;
}

// Shape membership in a unit frame: u to the right, v downwards, both in [-1, 1].
bool inside(ShapeFamily family, Point p) {
  const double r = std::sqrt(p.u * p.u + p.v * p.v);
  switch (family) {
    case ShapeFamily::bar: return near_any(p, {{{-0.9, 0}, {0.9, 0}}});
    case ShapeFamily::cross: return near_any(p, {{{-0.9, 0}, {0.9, 0}}, {{0, -0.9}, {0, 0.9}}});
    case ShapeFamily::lshape: return near_any(p, {{{-0.5, -0.9}, {-0.5, 0.8}}, {{-0.5, 0.8}, {0.7, 0.8}}});
    case ShapeFamily::disk: return r <= 0.75;
    case ShapeFamily::ring: return std::abs(r - 0.75) <= 0.15;
    case ShapeFamily::corner: return p.u >= -0.8 && p.v <= 0.8 && p.v >= p.u;  // lower-left right triangle
    case ShapeFamily::tee: return near_any(p, {{{-0.9, -0.7}, {0.9, -0.7}}, {{0, -0.7}, {0, 0.9}}});
    case ShapeFamily::u:
      return near_any(p, {{{-0.7, -0.9}, {-0.7, 0.7}}, {{-0.7, 0.7}, {0.7, 0.7}}, {{0.7, 0.7}, {0.7, -0.9}}});
    case ShapeFamily::x: return near_any(p, {{{-0.8, -0.8}, {0.8, 0.8}}, {{-0.8, 0.8}, {0.8, -0.8}}});
    case ShapeFamily::z:
      return near_any(p, {{{-0.8, -0.8}, {0.8, -0.8}}, {{0.8, -0.8}, {-0.8, 0.8}}, {{-0.8, 0.8}, {0.8, 0.8}}});
  }
  return false;
}

void add_noise(GrayImage& img, double stddev, Rng& rng) {
  if (stddev <= 0.0) return;
  for (auto& px : img.data) {
    const double v = static_cast<double>(px) + rng.normal(0.0, stddev);
    px = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
}

GrayImage random_shape(ShapeFamily family, std::size_t size, double noise, Rng& rng) {
  const auto& grid = shape_pose_grid();
  const auto& pose = grid[rng.uniform_int(grid.size())];
  GrayImage img = render_shape(family, pose, size);
  add_noise(img, noise, rng);
  return img;
}

void check_image_size(std::size_t size) {
  if (size < 8) throw ArgumentError("image size must be at least 8 pixels");
}

}  // namespace

const char* family_name(ShapeFamily family) {
  static constexpr const char* names[kShapeFamilies] = {"bar", "cross", "lshape", "disk", "ring",
                                                        "corner", "tee", "u", "x", "z"};
  return names[static_cast<std::size_t>(family)];
}

const std::vector<ShapePose>& shape_pose_grid() {
  static const std::vector<ShapePose> grid = [] {
    std::vector<ShapePose> g;
    for (double angle : {-20.0, -10.0, 0.0, 10.0, 20.0}) {
      for (double scale : {0.6, 0.7, 0.8}) {
        for (int dy = -3; dy <= 3; ++dy) {
          for (int dx = -3; dx <= 3; ++dx) g.push_back({angle, scale, dx, dy});
        }
      }
    }
    return g;
  }();
  return grid;
}

GrayImage render_shape(ShapeFamily family, const ShapePose& pose, std::size_t size) {
  check_image_size(size);
  GrayImage img(size, size, kBackground);
  const double half = static_cast<double>(size) / 2.0;
  const double cx = half + pose.dx;
  const double cy = half + pose.dy;
  const double radius = pose.scale * half;
  const double a = pose.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double px = static_cast<double>(x) + 0.5 - cx;
      const double py = static_cast<double>(y) + 0.5 - cy;
      const Point p{(c * px + s * py) / radius, (-s * px + c * py) / radius};
      if (inside(family, p)) img.at(x, y) = kForeground;
    }
  }
  return img;
}

std::string shape_class_name(std::size_t index) {
  if (index >= kShapeFamilies) throw ArgumentError("shape class index out of range");
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%02zu_%s", index, family_name(static_cast<ShapeFamily>(index)));
  return buf;
}

std::vector<LabeledSample> make_shapes_dataset(const DatasetSpec& spec) {
  if (spec.num_classes < 2) throw ArgumentError("dataset needs at least 2 classes");
  if (spec.num_classes > kShapeFamilies) {
    throw ArgumentError("at most " + std::to_string(kShapeFamilies) + " shape classes are available");
  }
  if (spec.samples_per_class == 0) throw ArgumentError("dataset needs at least 1 sample per class");
  check_image_size(spec.image_size);

  std::vector<LabeledSample> samples;
  samples.reserve(spec.num_classes * spec.samples_per_class);
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    Rng rng(mix_seed(spec.seed, k));
    const auto name = shape_class_name(k);
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      samples.push_back({random_shape(static_cast<ShapeFamily>(k), spec.image_size, spec.noise_stddev, rng), k, name});
    }
  }
  return samples;
}

std::vector<LabeledSample> make_binary_dataset(std::size_t samples_per_class, std::size_t image_size,
                                               double noise_stddev, std::uint64_t seed) {
  if (samples_per_class == 0) throw ArgumentError("dataset needs at least 1 sample per class");
  check_image_size(image_size);
  std::vector<ShapeFamily> others;
  for (std::size_t f = 0; f < kShapeFamilies; ++f) {
    if (static_cast<ShapeFamily>(f) != kTargetFamily) others.push_back(static_cast<ShapeFamily>(f));
  }
  std::vector<LabeledSample> samples;
  Rng neg(mix_seed(seed, 0));
  for (std::size_t i = 0; i < samples_per_class; ++i) {
    const auto family = others[neg.uniform_int(others.size())];
    samples.push_back({random_shape(family, image_size, noise_stddev, neg), 0, kNegativeLabel});
  }
  Rng pos(mix_seed(seed, 1));
  for (std::size_t i = 0; i < samples_per_class; ++i) {
    samples.push_back({random_shape(kTargetFamily, image_size, noise_stddev, pos), 1, kPositiveLabel});
  }
  return samples;
}

std::vector<ManifestRow> write_dataset(const std::vector<LabeledSample>& samples, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<ManifestRow> rows;
  std::vector<std::size_t> counters;
  for (const auto& s : samples) {
    if (counters.size() <= s.label) counters.resize(s.label + 1, 0);
    fs::create_directories(out_dir / s.class_name, ec);
    if (ec) throw IoError("cannot create " + (out_dir / s.class_name).string() + ": " + ec.message());
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.pgm", counters[s.label]++);
    const std::string rel = s.class_name + "/" + name;
    write_pnm(out_dir / rel, s.image);
    rows.push_back({rel, s.label, s.class_name});
  }
  std::ofstream manifest(out_dir / "manifest.csv");
  if (!manifest) throw IoError("cannot write " + (out_dir / "manifest.csv").string());
  manifest << "path,class_index,class_name\n";
  for (const auto& r : rows) manifest << r.path << ',' << r.class_index << ',' << r.class_name << '\n';
  return rows;
}

std::vector<ManifestRow> gen_shapes_dataset(const DatasetSpec& spec, const fs::path& out_dir) {
  return write_dataset(make_shapes_dataset(spec), out_dir);
}

std::vector<LabeledSample> load_labeled_dir(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> classes;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) classes.push_back(e.path());
  }
  std::sort(classes.begin(), classes.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  std::vector<LabeledSample> samples;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t label = 0;
  for (const auto& cls : classes) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cls)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(e.path());
    }
    if (files.empty()) continue;
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    const std::string name = cls.filename().string();
    for (const auto& f : files) {
      GrayImage img = read_gray(f);
      if (samples.empty()) {
        width = img.width;
        height = img.height;
      } else if (img.width != width || img.height != height) {
        throw ShapeError(f.string() + ": image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                         ", expected " + std::to_string(width) + "x" + std::to_string(height));
      }
      samples.push_back({std::move(img), label, name});
    }
    ++label;
  }
  if (samples.empty()) throw IoError("no labelled images found under " + dir.string());
  return samples;
}

std::vector<std::string> class_names(const std::vector<LabeledSample>& samples) {
  std::vector<std::string> names;
  for (const auto& s : samples) {
    if (names.size() <= s.label) names.resize(s.label + 1);
    names[s.label] = s.class_name;
  }
  return names;
}

std::vector<MotionFrame> make_motion_sequence(const MotionSpec& spec) {
  if (spec.object_size == 0) throw ArgumentError("motion object size must be positive");
  if (spec.object_size + 8 > spec.width || spec.object_size > spec.height) {
    throw ArgumentError("motion object does not fit the frame");
  }
  const auto size = static_cast<long>(spec.object_size);
  const auto width = static_cast<long>(spec.width);
  const long start_x = spec.velocity >= 0 ? 4 : width - size - 4;
  const long y = (static_cast<long>(spec.height) - size) / 2;
  const long last_x = start_x + spec.velocity * static_cast<long>(spec.n_frames == 0 ? 0 : spec.n_frames - 1);
  if (last_x < 0 || last_x + size > width) {
    throw ArgumentError("trajectory leaves the frame: x reaches " + std::to_string(last_x) + " after " +
                        std::to_string(spec.n_frames) + " frames");
  }

  Rng rng(spec.seed);
  std::vector<MotionFrame> frames;
  frames.reserve(spec.n_frames);
  for (std::size_t i = 0; i < spec.n_frames; ++i) {
    const long x = start_x + spec.velocity * static_cast<long>(i);
    GrayImage img(spec.width, spec.height, 0);
    for (long dy = 0; dy < size; ++dy) {
      for (long dx = 0; dx < size; ++dx) {
        img.at(static_cast<std::size_t>(x + dx), static_cast<std::size_t>(y + dy)) = (dx / 2) % 2 == 0 ? 255 : 80;
      }
    }
    add_noise(img, spec.noise_stddev, rng);
    const auto ux = static_cast<std::size_t>(x);
    const auto uy = static_cast<std::size_t>(y);
    frames.push_back({std::move(img), BBox{ux, uy, spec.object_size, spec.object_size, spec.object_size * spec.object_size}});
  }
  return frames;
}

std::string frame_file_name(std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.pgm", frame);
  return buf;
}

std::vector<MotionFrame> gen_motion_sequence(const MotionSpec& spec, const fs::path& out_dir) {
  auto frames = make_motion_sequence(spec);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::ofstream truth(out_dir / "truth.csv");
  if (!truth) throw IoError("cannot write " + (out_dir / "truth.csv").string());
  truth << "frame,x,y,w,h\n";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    write_pnm(out_dir / frame_file_name(i + 1), frames[i].image);
    const auto& b = frames[i].truth;
    truth << i + 1 << ',' << b.x << ',' << b.y << ',' << b.w << ',' << b.h << '\n';
  }
  return frames;
}

}  // namespace hgd
