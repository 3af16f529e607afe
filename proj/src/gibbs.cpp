#include "funkan/gibbs.hpp"

#include <numbers>
#include <string>

namespace funkan {

Eigen::MatrixXcd dft_matrix(Index n, bool inverse) {
  if (n < 1) throw ShapeError("dft_matrix: size must be positive");
  // One table of n roots; k * j is reduced mod n so every entry is an exact root.
  const double sign = inverse ? 1.0 : -1.0;
  Eigen::VectorXcd roots(n);
  for (Index m = 0; m < n; ++m) roots[m] = std::polar(1.0, sign * 2.0 * std::numbers::pi * double(m) / double(n));
  Eigen::MatrixXcd f(n, n);
  for (Index k = 0; k < n; ++k)
    for (Index j = 0; j < n; ++j) f(k, j) = roots[(k * j) % n];
  return f;
}

ComplexImage dft2(const ComplexImage& img) {
  return dft_matrix(img.rows()) * img * dft_matrix(img.cols()).transpose();
}

ComplexImage dft2(const Image& img) { return dft2(ComplexImage(img.matrix().cast<std::complex<double>>())); }

ComplexImage idft2(const ComplexImage& spectrum) {
  const double scale = 1.0 / double(spectrum.rows() * spectrum.cols());
  return scale * (dft_matrix(spectrum.rows(), true) * spectrum * dft_matrix(spectrum.cols(), true).transpose());
}

namespace {

ComplexImage roll(const ComplexImage& x, Index dy, Index dx) {
  const Index h = x.rows(), w = x.cols();
  ComplexImage out(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index c = 0; c < w; ++c) out(((y + dy) % h + h) % h, ((c + dx) % w + w) % w) = x(y, c);
  return out;
}

}  // namespace

ComplexImage fftshift(const ComplexImage& spectrum) {
  return roll(spectrum, spectrum.rows() / 2, spectrum.cols() / 2);
}

ComplexImage ifftshift(const ComplexImage& spectrum) {
  return roll(spectrum, -(spectrum.rows() / 2), -(spectrum.cols() / 2));
}

Image kspace_crop(const Image& img, Index h, Index w) {
  const Index H = img.rows(), W = img.cols();
  if (h < 1 || w < 1 || h > H || w > W)
    throw ShapeError("kspace_crop: crop " + std::to_string(h) + "x" + std::to_string(w) + " does not fit in " +
                     std::to_string(H) + "x" + std::to_string(W));
  const ComplexImage centered = fftshift(dft2(img));
  ComplexImage cropped = centered.block(H / 2 - h / 2, W / 2 - w / 2, h, w);
  cropped *= double(h * w) / double(H * W);
  return idft2(ifftshift(cropped)).real().array();
}

}  // namespace funkan
