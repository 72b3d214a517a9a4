#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hgd/error.hpp"
#include "hgd/imgproc.hpp"

namespace hgd {

namespace {

void require_nonempty(std::size_t w, std::size_t h) {
  if (w == 0 || h == 0) throw ShapeError("image dimensions must be at least 1x1");
}

template <class A, class B>
void require_same_size(const A& a, const B& b, const char* op) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError(std::string(op) + ": size mismatch " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

std::uint8_t round_clamp(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Sample position along one axis for output index `o`, pixel-centre aligned.
double source_coord(std::size_t o, std::size_t in_len, std::size_t out_len) {
  const double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in_len) / static_cast<double>(out_len) - 0.5;
  return std::clamp(s, 0.0, static_cast<double>(in_len - 1));
}

GrayImage resample_region(const GrayImage& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h,
                          std::size_t out_w, std::size_t out_h, Resample mode) {
  if (out_w == 0 || out_h == 0) throw ArgumentError("resample: output size must be at least 1x1");
  GrayImage out(out_w, out_h);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const double sy = source_coord(oy, h, out_h);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double sx = source_coord(ox, w, out_w);
      if (mode == Resample::nearest) {
        const auto nx = static_cast<std::size_t>(std::lround(sx));
        const auto ny = static_cast<std::size_t>(std::lround(sy));
        out.at(ox, oy) = img.at(x0 + nx, y0 + ny);
        continue;
      }
      const auto ix = static_cast<std::size_t>(std::floor(sx));
      const auto iy = static_cast<std::size_t>(std::floor(sy));
      const std::size_t ix1 = std::min(ix + 1, w - 1);
      const std::size_t iy1 = std::min(iy + 1, h - 1);
      const double fx = sx - static_cast<double>(ix);
      const double fy = sy - static_cast<double>(iy);
      const double top = (1 - fx) * img.at(x0 + ix, y0 + iy) + fx * img.at(x0 + ix1, y0 + iy);
      const double bottom = (1 - fx) * img.at(x0 + ix, y0 + iy1) + fx * img.at(x0 + ix1, y0 + iy1);
      out.at(ox, oy) = round_clamp((1 - fy) * top + fy * bottom);
    }
  }
  return out;
}

class DisjointSet {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

GrayImage::GrayImage(std::size_t w, std::size_t h, std::uint8_t fill) : width(w), height(h), data(w * h, fill) {
  require_nonempty(w, h);
}

GrayImage::GrayImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> pixels)
    : width(w), height(h), data(std::move(pixels)) {
  require_nonempty(w, h);
  if (data.size() != w * h) throw ShapeError("GrayImage: pixel count does not match dimensions");
}

RgbImage::RgbImage(std::size_t w, std::size_t h) : width(w), height(h), data(w * h * 3, 0) {
  require_nonempty(w, h);
}

RgbImage::RgbImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> pixels)
    : width(w), height(h), data(std::move(pixels)) {
  require_nonempty(w, h);
  if (data.size() != w * h * 3) throw ShapeError("RgbImage: channel count does not match dimensions");
}

std::size_t BinaryImage::count_on() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
}

double iou(const BBox& a, const BBox& b) {
  const std::size_t x0 = std::max(a.x, b.x);
  const std::size_t y0 = std::max(a.y, b.y);
  const std::size_t x1 = std::min(a.x + a.w, b.x + b.w);
  const std::size_t y1 = std::min(a.y + a.h, b.y + b.h);
  const double inter = (x1 > x0 && y1 > y0) ? static_cast<double>((x1 - x0) * (y1 - y0)) : 0.0;
  const double uni = static_cast<double>(a.w * a.h + b.w * b.h) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

GrayImage to_grayscale(const RgbImage& img) {
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double r = img.data[3 * i];
    const double g = img.data[3 * i + 1];
    const double b = img.data[3 * i + 2];
    out.data[i] = round_clamp(0.299 * r + 0.587 * g + 0.114 * b);
  }
  return out;
}

GrayImage box_blur(const GrayImage& img, std::size_t radius) {
  if (radius == 0) return img;
  const auto w = static_cast<std::ptrdiff_t>(img.width);
  const auto h = static_cast<std::ptrdiff_t>(img.height);
  const auto r = static_cast<std::ptrdiff_t>(radius);
  auto clamp_x = [w](std::ptrdiff_t x) { return std::clamp<std::ptrdiff_t>(x, 0, w - 1); };
  auto clamp_y = [h](std::ptrdiff_t y) { return std::clamp<std::ptrdiff_t>(y, 0, h - 1); };

  // Separable integer sums, then a single rounding step.
  std::vector<std::uint32_t> rows(img.data.size());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      std::uint32_t s = 0;
      for (std::ptrdiff_t d = -r; d <= r; ++d) s += img.data[y * w + clamp_x(x + d)];
      rows[y * w + x] = s;
    }
  }
  const std::uint32_t n = static_cast<std::uint32_t>((2 * r + 1) * (2 * r + 1));
  GrayImage out(img.width, img.height);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      std::uint32_t s = 0;
      for (std::ptrdiff_t d = -r; d <= r; ++d) s += rows[clamp_y(y + d) * w + x];
      out.data[y * w + x] = static_cast<std::uint8_t>((s + n / 2) / n);
    }
  }
  return out;
}

GrayImage abs_diff(const GrayImage& a, const GrayImage& b) {
  require_same_size(a, b, "abs_diff");
  GrayImage out(a.width, a.height);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out.data[i] = static_cast<std::uint8_t>(a.data[i] > b.data[i] ? a.data[i] - b.data[i] : b.data[i] - a.data[i]);
  }
  return out;
}

BinaryImage binarize(const GrayImage& img, std::uint8_t t) {
  BinaryImage out{img.width, img.height, std::vector<std::uint8_t>(img.data.size())};
  std::transform(img.data.begin(), img.data.end(), out.data.begin(),
                 [t](std::uint8_t v) -> std::uint8_t { return v > t ? 255 : 0; });
  return out;
}

BinaryImage triple_diff(const GrayImage& prev, const GrayImage& cur, const GrayImage& next, std::uint8_t t) {
  require_same_size(prev, cur, "triple_diff");
  require_same_size(cur, next, "triple_diff");
  const auto forward = binarize(abs_diff(next, cur), t);
  const auto backward = binarize(abs_diff(cur, prev), t);
  BinaryImage out = forward;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = (forward.data[i] & backward.data[i]) ? 255 : 0;
  return out;
}

std::vector<BBox> connected_components(const BinaryImage& img, std::size_t min_area) {
  const std::size_t w = img.width;
  const std::size_t h = img.height;
  constexpr std::uint32_t none = ~std::uint32_t{0};
  std::vector<std::uint32_t> labels(w * h, none);
  DisjointSet sets;

  // Pass 1: provisional labels from the already-visited half of the 8-neighbourhood.
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!img.on(x, y)) continue;
      std::uint32_t label = none;
      auto visit = [&](std::size_t nx, std::size_t ny) {
        const auto l = labels[ny * w + nx];
        if (l == none) return;
        if (label == none) {
          label = l;
        } else {
          sets.unite(label, l);
        }
      };
      if (x > 0) visit(x - 1, y);
      if (y > 0) {
        if (x > 0) visit(x - 1, y - 1);
        visit(x, y - 1);
        if (x + 1 < w) visit(x + 1, y - 1);
      }
      labels[y * w + x] = label == none ? sets.make() : label;
    }
  }

  // Pass 2: accumulate extents per root.
  struct Extent {
    std::size_t x0, y0, x1, y1, count, first;
  };
  std::vector<Extent> extents(sets.size(), Extent{w, h, 0, 0, 0, 0});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto l = labels[y * w + x];
      if (l == none) continue;
      auto& e = extents[sets.find(l)];
      if (e.count == 0) e.first = y * w + x;
      e.x0 = std::min(e.x0, x);
      e.y0 = std::min(e.y0, y);
      e.x1 = std::max(e.x1, x);
      e.y1 = std::max(e.y1, y);
      ++e.count;
    }
  }

  std::vector<std::pair<BBox, std::size_t>> found;
  for (const auto& e : extents) {
    if (e.count == 0 || e.count < min_area) continue;
    found.push_back({BBox{e.x0, e.y0, e.x1 - e.x0 + 1, e.y1 - e.y0 + 1, e.count}, e.first});
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    if (a.first.area != b.first.area) return a.first.area > b.first.area;
    if (a.first.y != b.first.y) return a.first.y < b.first.y;
    if (a.first.x != b.first.x) return a.first.x < b.first.x;
    return a.second < b.second;
  });
  std::vector<BBox> boxes;
  boxes.reserve(found.size());
  for (auto& f : found) boxes.push_back(f.first);
  return boxes;
}

GrayImage roi_resize(const GrayImage& img, const BBox& box, std::size_t out_w, std::size_t out_h, Resample mode) {
  if (box.w == 0 || box.h == 0 || box.x + box.w > img.width || box.y + box.h > img.height) {
    throw ShapeError("roi_resize: box " + std::to_string(box.x) + "," + std::to_string(box.y) + " " +
                     std::to_string(box.w) + "x" + std::to_string(box.h) + " is outside the " +
                     std::to_string(img.width) + "x" + std::to_string(img.height) + " image");
  }
  return resample_region(img, box.x, box.y, box.w, box.h, out_w, out_h, mode);
}

GrayImage resize(const GrayImage& img, std::size_t out_w, std::size_t out_h, Resample mode) {
  return resample_region(img, 0, 0, img.width, img.height, out_w, out_h, mode);
}

}  // namespace hgd
