#include "lottery/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lottery/rng.hpp"

namespace lottery {

PixelGrid make_constant_image(int height, int width, double value) {
  PixelGrid img(3, height, width);
  std::fill(img.values.begin(), img.values.end(), value);
  return img;
}

PixelGrid make_test_image(int height, int width, std::uint64_t seed) {
  Rng rng = derive_stream(seed, "synth/natural");
  PixelGrid img(3, height, width);
  const std::size_t plane = img.plane_size();
  constexpr double kPi = std::numbers::pi;

  auto luma_to_rgb = [&](double l, double chroma_r, double chroma_b, std::size_t p) {
    img.values[0 * plane + p] += l + chroma_r;
    img.values[1 * plane + p] += l;
    img.values[2 * plane + p] += l + chroma_b;
  };

  // Smooth background gradient.
  const double gtheta = rng.uniform(0.0, kPi);
  const double gfreq = rng.uniform(0.5, 1.5);
  const double gphase = rng.uniform(0.0, 2.0 * kPi);
  const double cr = rng.uniform(-0.08, 0.08);
  const double cb = rng.uniform(-0.08, 0.08);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / width, v = static_cast<double>(y) / height;
      const double t = u * std::cos(gtheta) + v * std::sin(gtheta);
      const double l = 0.5 + 0.18 * std::cos(gfreq * kPi * t + gphase);
      luma_to_rgb(l, cr * t, cb * (1.0 - t), static_cast<std::size_t>(y) * width + x);
    }
  }

  // Soft blobs.
  const int blobs = 2 + static_cast<int>(rng.uniform01() * 3);
  for (int b = 0; b < blobs; ++b) {
    const double bx = rng.uniform(0.1, 0.9) * width;
    const double by = rng.uniform(0.1, 0.9) * height;
    const double radius = rng.uniform(0.08, 0.25) * std::min(height, width);
    const double amp = rng.uniform(-0.22, 0.22);
    const double tint_r = rng.uniform(-0.5, 0.5), tint_b = rng.uniform(-0.5, 0.5);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double d2 = ((x - bx) * (x - bx) + (y - by) * (y - by)) / (radius * radius);
        const double g = amp * std::exp(-0.5 * d2);
        luma_to_rgb(g, g * tint_r, g * tint_b, static_cast<std::size_t>(y) * width + x);
      }
    }
  }

  // Oriented texture patches (Gabor-like).
  const int patches = 1 + static_cast<int>(rng.uniform01() * 2);
  for (int t = 0; t < patches; ++t) {
    const double px = rng.uniform(0.2, 0.8) * width;
    const double py = rng.uniform(0.2, 0.8) * height;
    const double sigma = rng.uniform(0.12, 0.3) * std::min(height, width);
    const double theta = rng.uniform(0.0, kPi);
    const double freq = rng.uniform(0.15, 0.45);  // cycles per pixel * 2pi below
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    const double amp = rng.uniform(0.06, 0.16);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = x - px, dy = y - py;
        const double along = dx * std::cos(theta) + dy * std::sin(theta);
        const double window = std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
        const double g = amp * window * std::sin(2.0 * kPi * freq * along + phase);
        luma_to_rgb(g, 0.0, 0.0, static_cast<std::size_t>(y) * width + x);
      }
    }
  }

  // Hard edges: half-plane brightness steps with a one-pixel ramp.
  const int edges = 1 + static_cast<int>(rng.uniform01() * 2);
  for (int e = 0; e < edges; ++e) {
    const double ex = rng.uniform(0.25, 0.75) * width;
    const double ey = rng.uniform(0.25, 0.75) * height;
    const double theta = rng.uniform(0.0, 2.0 * kPi);
    const double nx = std::cos(theta), ny = std::sin(theta);
    const double step = rng.uniform(-0.25, 0.25);
    const double tint_r = rng.uniform(-0.3, 0.3), tint_b = rng.uniform(-0.3, 0.3);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double s = (x - ex) * nx + (y - ey) * ny;
        const double ramp = std::clamp(s, -0.5, 0.5) + 0.5;  // 0 or 1 away from the edge
        const double g = step * ramp;
        luma_to_rgb(g, g * tint_r, g * tint_b, static_cast<std::size_t>(y) * width + x);
      }
    }
  }

  for (double& v : img.values) v = std::clamp(v, 0.0, 1.0);
  return img;
}

}  // namespace lottery
