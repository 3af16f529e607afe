#include "funkan/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "funkan/gibbs.hpp"

namespace funkan {

bool Primitive::contains(double x, double y) const {
  const double c = std::cos(angle), s = std::sin(angle);
  const double dx = x - cx, dy = y - cy;
  // rotate into the shape frame; y points down so the sign of s flips
  const double u = c * dx - s * dy;
  const double v = s * dx + c * dy;
  if (kind == Kind::ellipse) return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
  return std::abs(u) <= rx && std::abs(v) <= ry;
}

double Primitive::area() const { return kind == Kind::ellipse ? std::numbers::pi * rx * ry : 4 * rx * ry; }

double Phantom::value(double x, double y) const {
  double v = background;
  for (const auto& p : shapes)
    if (p.contains(x, y)) v = p.intensity;
  return v;
}

bool Phantom::inside(double x, double y) const {
  return std::any_of(shapes.begin(), shapes.end(), [&](const Primitive& p) { return p.contains(x, y); });
}

Phantom random_phantom(const PhantomSpec& spec, std::mt19937_64& rng) {
  if (spec.min_ellipses < 0 || spec.max_ellipses < spec.min_ellipses || spec.min_rectangles < 0 ||
      spec.max_rectangles < spec.min_rectangles)
    throw ConfigError("phantom: shape count ranges must satisfy 0 <= min <= max");
  if (!(spec.intensity_lo >= 0 && spec.intensity_hi <= 1 && spec.intensity_lo < spec.intensity_hi))
    throw ConfigError("phantom: intensity range must lie in [0, 1] and be nonempty");
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto count = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  const double lo = spec.intensity_lo, span = spec.intensity_hi - spec.intensity_lo;
  Phantom ph;
  ph.background = lo + span * uniform(0.0, 0.2);
  const int ne = count(spec.min_ellipses, spec.max_ellipses);
  const int nr = count(spec.min_rectangles, spec.max_rectangles);
  for (int i = 0; i < ne + nr; ++i) {
    Primitive p;
    p.kind = i < ne ? Primitive::Kind::ellipse : Primitive::Kind::rectangle;
    p.cx = uniform(0.25, 0.75);
    p.cy = uniform(0.25, 0.75);
    p.rx = uniform(0.08, 0.3);
    p.ry = uniform(0.08, 0.3);
    p.angle = uniform(0.0, std::numbers::pi);
    p.intensity = lo + span * uniform(0.3, 1.0);
    ph.shapes.push_back(p);
  }
  // large shapes first so small ones stay visible
  std::stable_sort(ph.shapes.begin(), ph.shapes.end(),
                   [](const Primitive& a, const Primitive& b) { return a.area() > b.area(); });
  return ph;
}

Image render(const Phantom& phantom, Index h, Index w, int supersample, double offset_x, double offset_y) {
  if (h < 1 || w < 1 || supersample < 1) throw ShapeError("render: sizes must be positive");
  Image out(h, w);
  const double inv = 1.0 / (double(supersample) * supersample);
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < w; ++j) {
      double acc = 0;
      for (int a = 0; a < supersample; ++a)
        for (int b = 0; b < supersample; ++b) {
          const double y = (double(i) + (a + 0.5) / supersample) / double(h) + offset_y;
          const double x = (double(j) + (b + 0.5) / supersample) / double(w) + offset_x;
          acc += phantom.value(x, y);
        }
      out(i, j) = acc * inv;
    }
  return out;
}

Image rasterize_mask(const Phantom& phantom, Index h, Index w) {
  Image out(h, w);
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < w; ++j)
      out(i, j) = phantom.inside((double(j) + 0.5) / double(w), (double(i) + 0.5) / double(h)) ? 1.0 : 0.0;
  return out;
}

double max_gradient(const Image& img) {
  double best = 0;
  for (Index i = 0; i < img.rows(); ++i)
    for (Index j = 0; j < img.cols(); ++j) {
      const double dx = j + 1 < img.cols() ? img(i, j + 1) - img(i, j) : 0.0;
      const double dy = i + 1 < img.rows() ? img(i + 1, j) - img(i, j) : 0.0;
      best = std::max(best, std::hypot(dx, dy));
    }
  return best;
}

SamplePair make_pair(const PhantomSpec& spec) {
  if (spec.crop < 2 || spec.crop > spec.canvas)
    throw ConfigError("make_pair: crop size must lie in [2, canvas]");
  std::mt19937_64 rng(spec.seed);
  const Index H = spec.canvas, h = spec.crop;
  // Sample j of the cropped image sits at canvas position j H / h, i.e. at
  // j / h + 0.5 / H in normalized units, not at the pixel center (j + 0.5) / h.
  const double offset = 0.5 / double(H) - 0.5 / double(h);
  for (;;) {
    SamplePair pair;
    pair.seed = spec.seed;
    pair.phantom = random_phantom(spec, rng);
    pair.target = render(pair.phantom, h, h, 4, offset, offset);
    if (max_gradient(pair.target) < 0.2) continue;
    pair.input = kspace_crop(render(pair.phantom, H, H), h, h);
    return pair;
  }
}

SamplePair make_mask_pair(const Phantom& phantom, Index h, Index w, std::uint64_t noise_seed) {
  if (h < 16 || w < 16 || h % 16 != 0 || w % 16 != 0)
    throw ConfigError("make_mask_pair: image sizes must be positive multiples of 16");
  SamplePair pair;
  pair.seed = noise_seed;
  pair.phantom = phantom;
  pair.target = rasterize_mask(phantom, h, w);
  pair.input = render(phantom, h, w);
  std::mt19937_64 rng(noise_seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 0.03);
  for (Index i = 0; i < pair.input.size(); ++i)
    pair.input.data()[i] = std::clamp(pair.input.data()[i] + noise(rng), 0.0, 1.0);
  return pair;
}

SamplePair make_mask_pair(const PhantomSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  Phantom ph = random_phantom(spec, rng);
  // foreground kept clearly above background
  for (auto& p : ph.shapes) p.intensity = std::min(1.0, std::max(p.intensity, ph.background + 0.3));
  return make_mask_pair(ph, spec.canvas, spec.canvas, spec.seed);
}

}  // namespace funkan
