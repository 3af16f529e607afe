#include "funkan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace funkan {

namespace {

static_assert(std::endian::native == std::endian::little, "raw float I/O assumes a little-endian host");

struct File {
  std::FILE* f = nullptr;
  ~File() {
    if (f) std::fclose(f);
  }
};

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

void write_png(const std::filesystem::path& path, Index h, Index w, int depth, int color,
               const std::vector<unsigned char>& bytes) {
  File file{std::fopen(path.c_str(), "wb")};
  if (!file.f) throw DataError("cannot open '" + path.string() + "' for writing");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) throw DataError("libpng initialization failed");
  const std::size_t stride = bytes.size() / std::size_t(h);
  std::vector<png_bytep> rows(h);
  for (Index i = 0; i < h; ++i) rows[i] = const_cast<png_bytep>(bytes.data() + std::size_t(i) * stride);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("writing '" + path.string() + "': " + err);
  }
  png_init_io(png, file.f);
  png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png16(const std::filesystem::path& path, const Image& img) {
  std::vector<unsigned char> bytes(std::size_t(img.size()) * 2);
  for (Index i = 0; i < img.size(); ++i) {
    const double v = std::isfinite(img.data()[i]) ? std::clamp(img.data()[i], 0.0, 1.0) : 0.0;
    const auto q = static_cast<unsigned>(std::lround(v * 65535.0));
    bytes[2 * i] = static_cast<unsigned char>(q >> 8);  // PNG is big-endian
    bytes[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
  }
  write_png(path, img.rows(), img.cols(), 16, PNG_COLOR_TYPE_GRAY, bytes);
}

Image read_png(const std::filesystem::path& path) {
  File file{std::fopen(path.c_str(), "rb")};
  if (!file.f) throw DataError("cannot open '" + path.string() + "'");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) throw DataError("libpng initialization failed");
  std::vector<unsigned char> bytes;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  int depth = 0, color = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("reading '" + path.string() + "': " + err);
  }
  png_init_io(png, file.f);
  png_read_info(png, info);
  png_get_IHDR(png, info, &w, &h, &depth, &color, nullptr, nullptr, nullptr);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("'" + path.string() + "' is not a grayscale PNG");
  }
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  bytes.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 i = 0; i < h; ++i) rows[i] = bytes.data() + i * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image out(h, w);
  const bool wide = depth == 16;
  for (Index i = 0; i < out.size(); ++i)
    out.data()[i] = wide ? double((bytes[2 * i] << 8) | bytes[2 * i + 1]) / 65535.0 : double(bytes[i]) / 255.0;
  return out;
}

std::pair<Index, Index> png_size(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char head[24];
  if (!in.read(reinterpret_cast<char*>(head), 24) || png_sig_cmp(head, 0, 8) != 0)
    throw DataError("'" + path.string() + "' is not a PNG file");
  auto be32 = [&](int at) { return Index(head[at]) << 24 | Index(head[at + 1]) << 16 | Index(head[at + 2]) << 8 | Index(head[at + 3]); };
  return {be32(20), be32(16)};
}

void write_heatmap_png(const std::filesystem::path& path, const Image& img, double lo, double hi) {
  if (!(hi > lo)) hi = lo + 1;
  std::vector<unsigned char> bytes(std::size_t(img.size()) * 3);
  for (Index i = 0; i < img.size(); ++i) {
    const double t = std::clamp((img.data()[i] - lo) / (hi - lo), 0.0, 1.0);
    // diverging map: blue at 0, white at 0.5, red at 1
    const double r = t < 0.5 ? 2 * t : 1.0;
    const double b = t < 0.5 ? 1.0 : 2 * (1 - t);
    const double g = 1 - std::abs(2 * t - 1);
    bytes[3 * i] = static_cast<unsigned char>(std::lround(255 * r));
    bytes[3 * i + 1] = static_cast<unsigned char>(std::lround(255 * g));
    bytes[3 * i + 2] = static_cast<unsigned char>(std::lround(255 * b));
  }
  write_png(path, img.rows(), img.cols(), 8, PNG_COLOR_TYPE_RGB, bytes);
}

void write_raw_f32(const std::filesystem::path& path, const Image& img) {
  std::vector<float> v(img.size());
  for (Index i = 0; i < img.size(); ++i) v[i] = float(img.data()[i]);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(float)));
  if (!out) throw DataError("short write to '" + path.string() + "'");
}

Image read_raw_f32(const std::filesystem::path& path, Index h, Index w) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) throw DataError("cannot stat '" + path.string() + "'");
  if (bytes != std::uintmax_t(h * w) * sizeof(float))
    throw DataError("'" + path.string() + "' holds " + std::to_string(bytes) + " bytes, expected " +
                    std::to_string(h * w * 4) + " for " + std::to_string(h) + "x" + std::to_string(w));
  std::vector<float> v(std::size_t(h * w));
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(v.data()), std::streamsize(bytes));
  if (!in) throw DataError("short read from '" + path.string() + "'");
  Image out(h, w);
  for (Index i = 0; i < h * w; ++i) out.data()[i] = v[i];
  return out;
}

}  // namespace funkan
