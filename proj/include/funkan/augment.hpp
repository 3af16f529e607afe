#pragma once

#include <random>
#include <string>

#include "funkan/image.hpp"

namespace funkan {

enum class Task { enhance, segment };

Task parse_task(const std::string& s);
const char* to_string(Task task);

struct Sample {
  std::string id;
  Image input;
  Image target;
};

struct AugmentConfig {
  bool enabled = true;
  double noise_sigma = 0.01;  // enhance: additive Gaussian noise on the input
  double hflip = 0.5;         // segment: per-transform probabilities
  double vflip = 0.5;
  double rot90 = 0.5;
  double transpose = 0.5;

  void validate() const;
};

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
Image rotate90(const Image& img);  // clockwise
Image transposed(const Image& img);

/// enhance: noise on the input only, target untouched. segment: each
/// transform drawn independently and applied to both input and mask; rot90
/// and transpose are skipped on non-square images. Inputs are clamped to [0, 1].
/// Always consumes the same number of draws for a given task.
Sample augment(Sample sample, Task task, const AugmentConfig& cfg, std::mt19937_64& rng);

}  // namespace funkan
