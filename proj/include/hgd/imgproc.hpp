#pragma once

// 8-bit image primitives for the motion stage: PGM/PPM codecs, grayscale
// conversion, box blur, frame differencing, thresholding, connected
// components and ROI resampling. Every function here is pure.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace hgd {

/// Row-major single-channel 8-bit plane.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0);
  GrayImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> pixels);

  std::uint8_t& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return data[y * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Row-major interleaved R,G,B triples.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h);
  RgbImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> pixels);

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Gray plane whose pixels are only ever 0 or 255. Only produced by
/// `binarize` and `triple_diff`.
struct BinaryImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> data;

  bool on(std::size_t x, std::size_t y) const { return data[y * width + x] != 0; }
  std::size_t count_on() const;

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;
};

struct BBox {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;
  std::size_t area = 0;  ///< foreground pixel count, not w*h

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Intersection over union of the two rectangles (areas ignored).
double iou(const BBox& a, const BBox& b);

using AnyImage = std::variant<GrayImage, RgbImage>;

// ---- codecs (binary P5/P6, maxval 255) ----

AnyImage decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const GrayImage& img);
std::vector<std::uint8_t> encode_pnm(const RgbImage& img);

/// Reads a P5 or P6 file; colour input is converted with `to_grayscale`.
GrayImage read_gray(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const GrayImage& img);
void write_pnm(const std::filesystem::path& path, const RgbImage& img);

// ---- pixel operations ----

/// BT.601 luma, round(0.299 R + 0.587 G + 0.114 B).
GrayImage to_grayscale(const RgbImage& img);

/// Rounded mean over a (2r+1)x(2r+1) window, edge pixels replicated.
GrayImage box_blur(const GrayImage& img, std::size_t radius);

GrayImage abs_diff(const GrayImage& a, const GrayImage& b);

/// 255 where pixel > t, else 0.
BinaryImage binarize(const GrayImage& img, std::uint8_t t);

/// Double differencing over three consecutive frames: both |next - cur| and
/// |cur - prev| must exceed `t` for a pixel to be foreground.
BinaryImage triple_diff(const GrayImage& prev, const GrayImage& cur, const GrayImage& next, std::uint8_t t);

/// 8-connected components with at least `min_area` pixels, largest first,
/// ties broken by (y, x).
std::vector<BBox> connected_components(const BinaryImage& img, std::size_t min_area);

enum class Resample { bilinear, nearest };

/// Crops `box` out of `img` and resamples it to out_w x out_h.
GrayImage roi_resize(const GrayImage& img, const BBox& box, std::size_t out_w, std::size_t out_h,
                     Resample mode = Resample::bilinear);

/// Whole-image resample, same sampling rule as `roi_resize`.
GrayImage resize(const GrayImage& img, std::size_t out_w, std::size_t out_h, Resample mode = Resample::bilinear);

}  // namespace hgd
