#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mmelab/atlas.hpp"
#include "mmelab/rays.hpp"
#include "mmelab/sampler.hpp"

namespace mmelab {

/// 8-bit RGB raster, row 0 at the top.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
};

namespace detail {

struct Rgb {
  double r, g, b;
};

inline Rgb hsv(double h, double s, double v) {
  h = h - std::floor(h);
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

inline std::uint8_t byte(double x) { return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); }

inline void put(Image& img, int x, int y, Rgb c) {
  auto* p = img.at(x, y);
  p[0] = byte(c.r);
  p[1] = byte(c.g);
  p[2] = byte(c.b);
}

}  // namespace detail

/// Hue by attracting cycle, brightness by phase. Cells next to a label
/// change are black, unresolved cells gray.
inline Image render_atlas(const FatouAtlas& atlas) {
  const int n = atlas.resolution();
  Image img(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const std::uint32_t label = atlas.label(x, y);
      if (atlas.julia_near(x, y)) {
        detail::put(img, x, y, {0, 0, 0});
        continue;
      }
      if (label == FatouAtlas::kUnresolved) {
        detail::put(img, x, y, {0.5, 0.5, 0.5});
        continue;
      }
      const auto& c = atlas.component(label);
      const double hue = 0.61803398875 * (c.cycle_id + 1);
      const double v = 0.95 - 0.12 * (c.phase % 4);
      detail::put(img, x, y, detail::hsv(hue, c.bounded ? 0.55 : 0.25, v));
    }
  }
  return img;
}

/// Log-scaled sample counts per atlas cell blended over the image in yellow.
inline void overlay_density(Image& img, const FatouAtlas& atlas, const MMESampleSet& samples) {
  const int n = atlas.resolution();
  std::vector<std::uint32_t> hist(static_cast<std::size_t>(n) * n, 0);
  std::uint32_t peak = 0;
  for (const auto& p : samples.points) {
    if (!p.is_finite()) continue;
    const auto cell = atlas.window().cell_of(p.value());
    if (!cell) continue;
    auto& h = hist[static_cast<std::size_t>(cell->second) * n + cell->first];
    peak = std::max(peak, ++h);
  }
  if (peak == 0) return;
  const double scale = std::log1p(static_cast<double>(peak));
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const std::uint32_t h = hist[static_cast<std::size_t>(y) * n + x];
      if (h == 0) continue;
      const double a = 0.35 + 0.65 * std::log1p(static_cast<double>(h)) / scale;
      auto* px = img.at(x, y);
      px[0] = detail::byte((1 - a) * px[0] / 255.0 + a);
      px[1] = detail::byte((1 - a) * px[1] / 255.0 + a * 0.85);
      px[2] = detail::byte((1 - a) * px[2] / 255.0 + a * 0.1);
    }
  }
}

/// Ray polylines in white, one pixel wide.
inline void overlay_ray(Image& img, const FatouAtlas& atlas, const RayTrace& ray) {
  const GridWindow& w = atlas.window();
  auto pixel = [&](cplx z) {
    const double h = w.cell_size();
    return std::pair{(z.real() - (w.center.real() - w.half_width)) / h - 0.5,
                     ((w.center.imag() + w.half_width) - z.imag()) / h - 0.5};
  };
  for (std::size_t i = 1; i < ray.samples.size(); ++i) {
    const auto [x0, y0] = pixel(ray.samples[i - 1].point);
    const auto [x1, y1] = pixel(ray.samples[i].point);
    const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
    if (steps > 4 * img.width) continue;
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const long x = std::lround(x0 + t * (x1 - x0));
      const long y = std::lround(y0 + t * (y1 - y0));
      if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
      detail::put(img, static_cast<int>(x), static_cast<int>(y), {1, 1, 1});
    }
  }
}

}  // namespace mmelab
