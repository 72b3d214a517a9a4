#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "hgd/error.hpp"
#include "hgd/imgproc.hpp"

namespace hgd {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::size_t read_number(const char* field) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) throw DecodeError(std::string("missing ") + field, pos_);
    if (!std::isdigit(bytes_[pos_])) throw DecodeError(std::string("expected digits for ") + field, pos_);
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 24)) throw DecodeError(std::string(field) + " is too large", start);
      ++pos_;
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void expect_single_space() {
    if (pos_ >= bytes_.size()) throw DecodeError("header ends before raster", pos_);
    if (!std::isspace(bytes_[pos_])) throw DecodeError("expected whitespace after maxval", pos_);
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

std::vector<std::uint8_t> encode_raw(const char* magic, std::size_t w, std::size_t h,
                                     const std::vector<std::uint8_t>& payload) {
  const std::string header = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

AnyImage decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) throw DecodeError("stream too short for magic", 0);
  if (bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) throw DecodeError("unsupported magic (want P5 or P6)", 0);
  const bool rgb = bytes[1] == '6';

  HeaderReader reader(bytes);
  const std::size_t width_at = reader.pos();
  const auto width = reader.read_number("width");
  const auto height = reader.read_number("height");
  if (width == 0 || height == 0) throw DecodeError("zero image dimension", width_at);
  const auto maxval_at = reader.pos();
  const auto maxval = reader.read_number("maxval");
  if (maxval != 255) throw DecodeError("maxval " + std::to_string(maxval) + " unsupported (want 255)", maxval_at);
  reader.expect_single_space();

  const std::size_t payload = width * height * (rgb ? 3 : 1);
  const std::size_t start = reader.pos();
  if (bytes.size() - start < payload) {
    throw DecodeError("truncated payload: need " + std::to_string(payload) + " bytes, have " +
                          std::to_string(bytes.size() - start),
                      bytes.size());
  }
  std::vector<std::uint8_t> pixels(bytes.begin() + start, bytes.begin() + start + payload);
  if (rgb) return RgbImage(width, height, std::move(pixels));
  return GrayImage(width, height, std::move(pixels));
}

std::vector<std::uint8_t> encode_pnm(const GrayImage& img) { return encode_raw("P5", img.width, img.height, img.data); }

std::vector<std::uint8_t> encode_pnm(const RgbImage& img) { return encode_raw("P6", img.width, img.height, img.data); }

GrayImage read_gray(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    auto image = decode_pnm(bytes);
    if (auto* gray = std::get_if<GrayImage>(&image)) return std::move(*gray);
    return to_grayscale(std::get<RgbImage>(image));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what(), e.offset());
  }
}

void write_pnm(const std::filesystem::path& path, const GrayImage& img) { write_file(path, encode_pnm(img)); }

void write_pnm(const std::filesystem::path& path, const RgbImage& img) { write_file(path, encode_pnm(img)); }

}  // namespace hgd
