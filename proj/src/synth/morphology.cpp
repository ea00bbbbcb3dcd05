#include "gds/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gds {

namespace {

constexpr double kFar = 1e20;

// Lower envelope of parabolas: d(q) = min_p (q - p)^2 + f(p).
void distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                 std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[static_cast<std::size_t>(q)] + static_cast<double>(q) * q) -
           (f[static_cast<std::size_t>(p)] + static_cast<double>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
    const int p = v[static_cast<std::size_t>(k)];
    d[static_cast<std::size_t>(q)] = static_cast<double>(q - p) * (q - p) + f[static_cast<std::size_t>(p)];
  }
}

}  // namespace

ImageGrid squared_distance_to(const MaskGrid& mask, std::uint8_t target) {
  const int h = mask.height, w = mask.width;
  ImageGrid out(h, w, kFar);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if ((mask.data[i] != 0) == (target != 0)) out.data[i] = 0.0;
  }
  const int n = std::max(h, w);
  std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  f.resize(static_cast<std::size_t>(h));
  d.resize(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = out(y, x);
    distance_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) out(y, x) = d[static_cast<std::size_t>(y)];
  }
  f.resize(static_cast<std::size_t>(w));
  d.resize(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(x)] = out(y, x);
    distance_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) out(y, x) = d[static_cast<std::size_t>(x)];
  }
  for (auto& x : out.data) {
    if (x >= kFar * 0.5) x = std::numeric_limits<double>::infinity();
  }
  return out;
}

MaskGrid dilate_disk(const MaskGrid& mask, double radius) {
  const auto d2 = squared_distance_to(mask, 1);
  const double r2 = radius * radius;
  MaskGrid out(mask.height, mask.width, 0);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = d2.data[i] <= r2 ? 1 : 0;
  return out;
}

MaskGrid erode_disk(const MaskGrid& mask, double radius) {
  const auto d2 = squared_distance_to(mask, 0);
  const double r2 = radius * radius;
  MaskGrid out(mask.height, mask.width, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = (mask.data[i] != 0 && d2.data[i] > r2) ? 1 : 0;
  }
  return out;
}

MaskGrid inner_boundary(const MaskGrid& mask) {
  MaskGrid out(mask.height, mask.width, 0);
  const int dy[] = {-1, 1, 0, 0};
  const int dx[] = {0, 0, -1, 1};
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask(y, x)) continue;
      for (int k = 0; k < 4; ++k) {
        const int ny = y + dy[k], nx = x + dx[k];
        if (!mask.contains(ny, nx) || !mask(ny, nx)) {
          out(y, x) = 1;
          break;
        }
      }
    }
  }
  return out;
}

ImageGrid gaussian_blur(const ImageGrid& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (auto& v : kernel) v /= total;

  const int h = image.height, w = image.width;
  ImageGrid tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        s += kernel[static_cast<std::size_t>(i + radius)] * image(y, std::clamp(x + i, 0, w - 1));
      }
      tmp(y, x) = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        s += kernel[static_cast<std::size_t>(i + radius)] * tmp(std::clamp(y + i, 0, h - 1), x);
      }
      out(y, x) = s;
    }
  }
  return out;
}

double sample_bilinear_zero(const ImageGrid& image, double y, double x) {
  const double fy = std::floor(y), fx = std::floor(x);
  const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
  const double ty = y - fy, tx = x - fx;
  auto at = [&](int yy, int xx) { return image.contains(yy, xx) ? image(yy, xx) : 0.0; };
  return (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
         ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
}

}  // namespace gds
