#pragma once

#include <complex>

#include <Eigen/Core>

#include "funkan/image.hpp"

namespace funkan {

using ComplexImage = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// n x n DFT matrix, F[k, j] = exp(-+2 pi i k j / n); no normalization.
Eigen::MatrixXcd dft_matrix(Index n, bool inverse = false);

/// Unnormalized forward transform, DC at [0, 0].
ComplexImage dft2(const Image& img);
ComplexImage dft2(const ComplexImage& img);
/// Inverse transform including the 1 / (h w) factor.
ComplexImage idft2(const ComplexImage& spectrum);

/// Quadrant swap moving DC to [h/2, w/2], and its inverse.
ComplexImage fftshift(const ComplexImage& spectrum);
ComplexImage ifftshift(const ComplexImage& spectrum);

/// Keeps the central h x w block of the centered spectrum, rescales it by
/// (h w) / (H W) so the mean intensity survives, and returns the real part of
/// the inverse transform. Throws ShapeError when the crop exceeds the input.
Image kspace_crop(const Image& img, Index h, Index w);

}  // namespace funkan
