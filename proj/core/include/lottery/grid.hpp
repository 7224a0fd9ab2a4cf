#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lottery {

// Channel-major raster (row-major within a channel). Holds image planes,
// upsampled latents, feature maps and modulation maps alike.
struct PixelGrid {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  PixelGrid() = default;
  PixelGrid(int c, int h, int w) : channels(c), height(h), width(w) {
    values.assign(static_cast<std::size_t>(c) * h * w, 0.0);
  }

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return values.size(); }

  double& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  std::span<double> plane(int c) {
    return {values.data() + plane_size() * c, plane_size()};
  }
  std::span<const double> plane(int c) const {
    return {values.data() + plane_size() * c, plane_size()};
  }
};

// Dense row-major matrix, the workhorse of the small layer stacks.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
  std::span<double> row(int r) { return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int r) const {
    return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::size_t size() const { return a.size(); }
};

// y = A x
inline void matvec(const Matrix& m, std::span<const double> x, std::span<double> y) {
  for (int r = 0; r < m.rows; ++r) {
    const double* w = m.a.data() + static_cast<std::size_t>(r) * m.cols;
    double acc = 0.0;
    for (int c = 0; c < m.cols; ++c) acc += w[c] * x[c];
    y[r] = acc;
  }
}

}  // namespace lottery
