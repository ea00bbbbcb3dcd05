#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gds/errors.hpp"

namespace gds {

// Row-major H x W grid.
template <class T>
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int h, int w, T fill = T{})
      : height(h), width(w), data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  std::size_t size() const { return data.size(); }
  T& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int y, int x) const { return y >= 0 && y < height && x >= 0 && x < width; }
  bool same_extents(int h, int w) const { return height == h && width == w; }
  template <class U>
  bool same_extents(const Grid<U>& o) const { return height == o.height && width == o.width; }

  bool operator==(const Grid&) const = default;
};

using ImageGrid = Grid<double>;
using MaskGrid = Grid<std::uint8_t>;

template <class A, class B>
void require_same_extents(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_extents(b)) {
    throw ShapeError(std::string(what) + ": grid " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
  }
}

inline std::size_t foreground_count(const MaskGrid& m) {
  std::size_t n = 0;
  for (auto v : m.data) n += v != 0;
  return n;
}

}  // namespace gds
