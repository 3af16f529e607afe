#pragma once

#include "funkan/ops.hpp"

namespace funkan {

/// (1/N) sum_i ||pred_i - target_i||^2 with the squared norm summed over
/// pixels; `pixel_mean` divides each image term by its pixel count instead.
template <typename Scalar>
Tensor<Scalar> loss_enhance(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, bool pixel_mean = false) {
  if (pred.rank() == 0 || pred.dim(0) == 0) throw ShapeError("loss_enhance: empty batch");
  if (pred.shape() != target.shape())
    throw ShapeError("loss_enhance: shapes differ, " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  const Index n = pred.dim(0);
  const double denom = pixel_mean ? double(pred.numel()) : double(n);
  return sum(square(pred - target)) / Scalar(denom);
}

/// Batch mean of 0.1 * pixel-mean BCE + soft Dice loss with smoothing 1.
template <typename Scalar>
Tensor<Scalar> loss_segment(const Tensor<Scalar>& logits, const Tensor<Scalar>& mask) {
  if (logits.rank() == 0 || logits.dim(0) == 0) throw ShapeError("loss_segment: empty batch");
  if (logits.shape() != mask.shape())
    throw ShapeError("loss_segment: shapes differ, " + to_string(logits.shape()) + " vs " + to_string(mask.shape()));
  const Scalar pixels = Scalar(logits.numel() / logits.dim(0));
  Tensor<Scalar> ce = sum_per_sample(bce_with_logits(logits, mask)) / pixels;
  Tensor<Scalar> p = sigmoid(logits);
  Tensor<Scalar> overlap = sum_per_sample(p * mask) * Scalar(2) + Scalar(1);
  Tensor<Scalar> total = sum_per_sample(p) + sum_per_sample(mask) + Scalar(1);
  Tensor<Scalar> dice = (overlap / total) * Scalar(-1) + Scalar(1);
  return mean(ce * Scalar(0.1) + dice);
}

}  // namespace funkan
