#pragma once

#include "funkan/image.hpp"

namespace funkan {

struct KellnerOptions {
  int shifts = 20;     // M: 2M + 1 candidate shifts s / (2M), s in [-M, M]
  int min_window = 1;  // k1
  int max_window = 3;  // k2
};

/// Band-limited shift of every row by `s` pixels via a linear phase ramp:
/// out(i, l) = x(i, l + s) for the periodic interpolant. For even widths the
/// Nyquist bin is dropped unless s == 0.
Image fourier_shift_rows(const Image& img, double s);

/// Kellner subvoxel-shift deringing along rows only.
Image unring_rows(const Image& img, const KellnerOptions& options = {});

/// Mean of the row-wise and column-wise deringing results.
/// Throws DataError on non-finite input.
Image kellner_dering(const Image& img, const KellnerOptions& options = {});

}  // namespace funkan
