#include "funkan/kellner.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "funkan/gibbs.hpp"

namespace funkan {

namespace {

using RowSpectrum = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-wise spectrum times the phase ramp of a shift by s, transformed back.
Image shifted(const RowSpectrum& spectrum, const Eigen::MatrixXcd& inverse, double s) {
  const Index n = spectrum.cols();
  if (s == 0) return (spectrum * inverse.transpose()).real().array() / double(n);
  Eigen::RowVectorXcd ramp = Eigen::RowVectorXcd::Zero(n);
  ramp[0] = 1;
  const Index maxn = n % 2 == 1 ? (n - 1) / 2 : n / 2 - 1;
  const double phi = 2 * std::numbers::pi * s / double(n);
  for (Index l = 1; l <= maxn; ++l) {
    ramp[l] = std::polar(1.0, phi * double(l));
    ramp[n - l] = std::polar(1.0, -phi * double(l));
  }
  RowSpectrum ramped = spectrum.array().rowwise() * ramp.array();
  return (ramped * inverse.transpose()).real().array() / double(n);
}

}  // namespace

Image fourier_shift_rows(const Image& img, double s) {
  const Index n = img.cols();
  RowSpectrum spectrum = img.matrix().cast<std::complex<double>>() * dft_matrix(n).transpose();
  return shifted(spectrum, dft_matrix(n, true), s);
}

Image unring_rows(const Image& img, const KellnerOptions& options) {
  const int M = options.shifts, k1 = options.min_window, k2 = options.max_window;
  if (M < 1 || k1 < 0 || k2 < k1) throw ConfigError("kellner: need shifts >= 1 and 0 <= k1 <= k2");
  const Index h = img.rows(), n = img.cols();
  if (n < 2) return img;

  RowSpectrum spectrum = img.matrix().cast<std::complex<double>>() * dft_matrix(n).transpose();
  const Eigen::MatrixXcd inverse = dft_matrix(n, true);

  // candidate order 0, 1..M, -1..-M; ties keep the earliest
  std::vector<int> shifts{0};
  for (int j = 1; j <= M; ++j) shifts.push_back(j);
  for (int j = 1; j <= M; ++j) shifts.push_back(-j);
  std::vector<Image> copies;
  for (int sh : shifts) copies.push_back(shifted(spectrum, inverse, double(sh) / (2.0 * M)));

  auto at = [n](const Image& y, Index row, Index col) { return y(row, ((col % n) + n) % n); };
  Image out(h, n);
  for (Index row = 0; row < h; ++row)
    for (Index l = 0; l < n; ++l) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < copies.size(); ++j) {
        double left = 0, right = 0;
        for (int t = k1; t <= k2; ++t) {
          left += std::abs(at(copies[j], row, l - t) - at(copies[j], row, l - t - 1));
          right += std::abs(at(copies[j], row, l + t) - at(copies[j], row, l + t + 1));
        }
        if (left < best) best = left, best_j = j;
        if (right < best) best = right, best_j = j;
      }
      // the chosen copy is sampled at l + s; interpolate back to l
      const Image& y = copies[best_j];
      const double s = double(shifts[best_j]) / (2.0 * M);
      out(row, l) = s > 0 ? y(row, l) * (1 - s) + at(y, row, l - 1) * s
                          : y(row, l) * (1 + s) + at(y, row, l + 1) * (-s);
    }
  return out;
}

Image kellner_dering(const Image& img, const KellnerOptions& options) {
  if (!img.allFinite()) throw DataError("kellner_dering: input contains non-finite values");
  const Image along_rows = unring_rows(img, options);
  const Image along_cols = unring_rows(Image(img.transpose()), options).transpose();
  return 0.5 * (along_rows + along_cols);
}

}  // namespace funkan
