#pragma once

#include <limits>
#include <string>
#include <vector>

#include "funkan/image.hpp"

namespace funkan {

/// 10 log10(peak^2 / MSE) after clamping both images to [0, peak];
/// +infinity when they agree exactly.
double psnr(const Image& pred, const Image& target, double peak = 1.0);

/// Isotropic TV: sum of sqrt(dx^2 + dy^2) over forward differences with a
/// replicated last row and column.
double total_variation(const Image& img);

/// Thresholds sigmoid(logits) at `threshold`; the mask is binarized at 0.5.
/// Empty prediction against empty mask scores 1.
double iou(const Image& logits, const Image& mask, double threshold = 0.5);
double f1(const Image& logits, const Image& mask, double threshold = 0.5);

/// Same scores on already-binary images (nonzero = foreground).
double iou_binary(const Image& p, const Image& g);
double f1_binary(const Image& p, const Image& g);

struct MetricReport {
  std::string name;
  std::vector<double> values;
  double mean = 0;
  double std = 0;  // sample standard deviation, 0 for a single value

  Index count() const { return Index(values.size()); }
  static MetricReport from(std::string name, std::vector<double> values);
};

}  // namespace funkan
