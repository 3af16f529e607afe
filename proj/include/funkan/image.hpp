#pragma once

#include <vector>

#include <Eigen/Core>

#include "funkan/tensor.hpp"

namespace funkan {

/// Single-channel image [h, w] in double precision, row-major.
using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Stacks same-sized images into an [N, 1, h, w] tensor.
template <typename Scalar>
Tensor<Scalar> to_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw ShapeError("to_tensor: empty batch");
  const Index h = images[0].rows(), w = images[0].cols();
  Tensor<Scalar> out({Index(images.size()), 1, h, w});
  for (std::size_t b = 0; b < images.size(); ++b) {
    if (images[b].rows() != h || images[b].cols() != w)
      throw ShapeError("to_tensor: image " + std::to_string(b) + " has a different size");
    for (Index i = 0; i < h * w; ++i) out[Index(b) * h * w + i] = Scalar(images[b].data()[i]);
  }
  return out;
}

/// Channel `c` of sample `n` of an [N, C, h, w] tensor.
template <typename Scalar>
Image to_image(const Tensor<Scalar>& t, Index n = 0, Index c = 0) {
  if (t.rank() != 4) throw ShapeError("to_image: expected [N, C, h, w], got " + to_string(t.shape()));
  const Index h = t.dim(2), w = t.dim(3);
  Image out(h, w);
  const Index base = (n * t.dim(1) + c) * h * w;
  for (Index i = 0; i < h * w; ++i) out.data()[i] = double(t[base + i]);
  return out;
}

}  // namespace funkan
