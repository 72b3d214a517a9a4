#pragma once

// Reference implementations and fixtures shared by the test suites. The
// oracles are deliberately naive and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "hgd/imgproc.hpp"
#include "hgd/network.hpp"
#include "hgd/tensor.hpp"

namespace hgd::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "hgd_test_XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Direct quadruple loop: zero padding 1, stride 1, cross-correlation.
inline Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t c = x.dim(0), h = x.dim(1), wd = x.dim(2), o = w.dim(0);
  Tensor y({o, h, wd});
  for (std::size_t oc = 0; oc < o; ++oc) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < wd; ++j) {
        double s = b[oc];
        for (std::size_t ic = 0; ic < c; ++ic) {
          for (int ki = 0; ki < 3; ++ki) {
            for (int kj = 0; kj < 3; ++kj) {
              const long yi = static_cast<long>(i) + ki - 1;
              const long xj = static_cast<long>(j) + kj - 1;
              if (yi < 0 || xj < 0 || yi >= static_cast<long>(h) || xj >= static_cast<long>(wd)) continue;
              s += w[((oc * c + ic) * 3 + ki) * 3 + kj] * x[(ic * h + yi) * wd + xj];
            }
          }
        }
        y[(oc * h + i) * wd + j] = s;
      }
    }
  }
  return y;
}

inline Tensor naive_pool(const Tensor& x) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y({c, h / 2, w / 2});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h / 2; ++i) {
      for (std::size_t j = 0; j < w / 2; ++j) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t di = 0; di < 2; ++di) {
          for (std::size_t dj = 0; dj < 2; ++dj) m = std::max(m, x[(ch * h + 2 * i + di) * w + 2 * j + dj]);
        }
        y[(ch * (h / 2) + i) * (w / 2) + j] = m;
      }
    }
  }
  return y;
}

/// d f / d x[i] by central differences, for every entry of x.
inline Tensor numeric_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps = 1e-5) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe);
    probe[i] = x[i] - eps;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Component areas by recursive-free flood fill over 8-neighbourhoods, plus
/// the bounding box of each, in discovery (row-major seed) order.
struct FloodComponent {
  std::size_t min_x, min_y, max_x, max_y, area;
};

inline std::vector<FloodComponent> flood_fill_components(const BinaryImage& img) {
  std::vector<int> seen(img.width * img.height, 0);
  std::vector<FloodComponent> out;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      if (!img.on(x, y) || seen[y * img.width + x]) continue;
      FloodComponent c{x, y, x, y, 0};
      std::vector<std::pair<std::size_t, std::size_t>> stack{{x, y}};
      seen[y * img.width + x] = 1;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++c.area;
        c.min_x = std::min(c.min_x, cx);
        c.max_x = std::max(c.max_x, cx);
        c.min_y = std::min(c.min_y, cy);
        c.max_y = std::max(c.max_y, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const long nx = static_cast<long>(cx) + dx, ny = static_cast<long>(cy) + dy;
            if (nx < 0 || ny < 0 || nx >= static_cast<long>(img.width) || ny >= static_cast<long>(img.height)) continue;
            const std::size_t k = static_cast<std::size_t>(ny) * img.width + static_cast<std::size_t>(nx);
            if (img.data[k] && !seen[k]) {
              seen[k] = 1;
              stack.push_back({static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)});
            }
          }
        }
      }
      out.push_back(c);
    }
  }
  return out;
}

inline GrayImage random_gray(std::size_t w, std::size_t h, Rng& rng) {
  GrayImage img(w, h);
  for (auto& p : img.data) p = static_cast<std::uint8_t>(rng.uniform_int(256));
  return img;
}

/// Small 32x32 classifier that trains in milliseconds; used where a test
/// needs an overfit "planted target" detector rather than the full CNN.
inline Network tiny_patch_net(std::uint64_t seed, std::size_t classes = 2) {
  Network net({1, 32, 32}, {LayerSpec::conv2d(1, 4), LayerSpec::relu(), LayerSpec::maxpool2x2(),
                            LayerSpec::maxpool2x2(), LayerSpec::flatten(), LayerSpec::dense(4 * 8 * 8, classes),
                            LayerSpec::softmax()});
  net.init_he(seed);
  return net;
}

}  // namespace hgd::test
