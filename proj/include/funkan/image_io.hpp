#pragma once

#include <filesystem>
#include <utility>

#include "funkan/image.hpp"

namespace funkan {

/// 16-bit grayscale PNG; values are clamped to [0, 1] and scaled to 0..65535.
void write_png16(const std::filesystem::path& path, const Image& img);

/// Grayscale PNG of depth 8 or 16 mapped to [0, 1]. Colour images are rejected.
Image read_png(const std::filesystem::path& path);

/// (height, width) from the PNG header.
std::pair<Index, Index> png_size(const std::filesystem::path& path);

/// 8-bit RGB heat map of `img` over [lo, hi] (blue - white - red).
void write_heatmap_png(const std::filesystem::path& path, const Image& img, double lo, double hi);

/// Row-major little-endian float32 without a header.
void write_raw_f32(const std::filesystem::path& path, const Image& img);
Image read_raw_f32(const std::filesystem::path& path, Index h, Index w);

}  // namespace funkan
