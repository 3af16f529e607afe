#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "funkan/image.hpp"

namespace funkan {

/// Filled ellipse or rectangle in normalized canvas coordinates: x grows to
/// the right and y downwards, both over [0, 1].
struct Primitive {
  enum class Kind { ellipse, rectangle };
  Kind kind = Kind::ellipse;
  double cx = 0.5, cy = 0.5;
  double rx = 0.25, ry = 0.25;  // semi-axes or half-extents
  double angle = 0;             // radians, counter-clockwise
  double intensity = 1;

  bool contains(double x, double y) const;
  double area() const;
};

/// Shapes painted in order over a constant background; later shapes win.
struct Phantom {
  double background = 0;
  std::vector<Primitive> shapes;

  double value(double x, double y) const;
  bool inside(double x, double y) const;
};

struct PhantomSpec {
  Index canvas = 255;  // H = W of the high-resolution render (mask image size for segmentation)
  Index crop = 145;    // h' = w' of the corrupted and target images
  int min_ellipses = 1, max_ellipses = 3;
  int min_rectangles = 0, max_rectangles = 2;
  double intensity_lo = 0, intensity_hi = 1;
  std::uint64_t seed = 0;
};

struct SamplePair {
  Image input;   // I0: corrupted image, or the grayscale blob image for masks
  Image target;  // I1: clean band-limited reference, or the binary mask
  std::uint64_t seed = 0;
  Phantom phantom;
};

Phantom random_phantom(const PhantomSpec& spec, std::mt19937_64& rng);

/// Area-averaged render with `supersample`^2 samples per pixel. Pixel (i, j)
/// covers [j/w, (j+1)/w] x [i/h, (i+1)/h], displaced by (offset_x, offset_y).
Image render(const Phantom& phantom, Index h, Index w, int supersample = 4, double offset_x = 0, double offset_y = 0);

/// 1 where the pixel center lies inside any shape.
Image rasterize_mask(const Phantom& phantom, Index h, Index w);

/// I0 = kspace_crop of the canvas render; I1 = direct render at crop size on
/// the same sample positions. Redraws until I1 has an edge with |grad| >= 0.2.
SamplePair make_pair(const PhantomSpec& spec);

/// Blob image with mild noise plus its union mask; canvas must be divisible by 16.
SamplePair make_mask_pair(const PhantomSpec& spec);
SamplePair make_mask_pair(const Phantom& phantom, Index h, Index w, std::uint64_t noise_seed);

/// Largest forward-difference gradient magnitude.
double max_gradient(const Image& img);

}  // namespace funkan
