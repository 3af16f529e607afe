#include "doctest.h"

#include <cmath>
#include <random>

#include "funkan/gibbs.hpp"
#include "funkan/kellner.hpp"
#include "funkan/metrics.hpp"
#include "funkan/phantom.hpp"

using namespace funkan;

namespace {

Image random_image(Index h, Index w, std::uint64_t seed, double lo = 0, double hi = 1) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Image x(h, w);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = d(g);
  return x;
}

Image binary(Index h, Index w, std::uint64_t seed) {
  return random_image(h, w, seed).unaryExpr([](double v) { return v > 0.6 ? 1.0 : 0.0; });
}

}  // namespace

TEST_CASE("psnr") {
  Image a = random_image(8, 8, 1);
  CHECK(std::isinf(psnr(a, a)));
  CHECK(psnr(a, a) > 0);
  Image z = Image::Zero(4, 4);
  CHECK(psnr(Image::Constant(4, 4, 0.1), z) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(Image::Constant(4, 4, 1.0), z) == doctest::Approx(0.0));
  Image b = random_image(8, 8, 2);
  CHECK(psnr(a, b) == psnr(b, a));
  // values outside [0, 1] are clamped first
  CHECK(psnr(Image::Constant(4, 4, 3.0), Image::Constant(4, 4, 1.0)) == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(psnr(a, Image::Zero(8, 7)), ShapeError);
}

TEST_CASE("total variation") {
  CHECK(total_variation(Image::Constant(5, 6, 0.4)) == 0.0);
  Image x(2, 2);
  x << 0, 1, 0, 1;
  CHECK(total_variation(x) == doctest::Approx(2.0));
  Image r = random_image(9, 11, 3);
  CHECK(total_variation(2.5 * r) == doctest::Approx(2.5 * total_variation(r)).epsilon(1e-12));
  CHECK_THROWS_AS(total_variation(Image::Zero(1, 5)), ShapeError);
}

TEST_CASE("overlap scores") {
  Image full = Image::Ones(8, 8), left = Image::Zero(8, 8);
  left.leftCols(4) = 1;
  CHECK(iou_binary(full, full) == 1.0);
  CHECK(f1_binary(full, full) == 1.0);
  Image right = full - left;
  CHECK(iou_binary(left, right) == 0.0);
  CHECK(f1_binary(left, right) == 0.0);
  CHECK(iou_binary(left, full) == doctest::Approx(0.5));
  CHECK(f1_binary(left, full) == doctest::Approx(2.0 / 3.0));
  CHECK(iou_binary(Image::Zero(3, 3), Image::Zero(3, 3)) == 1.0);
  CHECK(f1_binary(Image::Zero(3, 3), Image::Zero(3, 3)) == 1.0);

  // logits pass through a sigmoid before thresholding
  Image logits = (2 * left - 1) * 5;
  CHECK(iou(logits, full) == doctest::Approx(0.5));
  CHECK(iou(Image::Zero(8, 8), full) == 0.0);  // sigmoid(0) = 0.5 is not above threshold

  for (std::uint64_t s = 0; s < 50; ++s) {
    Image p = binary(10, 12, s), g = binary(10, 12, s + 100);
    const double i = iou_binary(p, g);
    CHECK(std::abs(f1_binary(p, g) - 2 * i / (1 + i)) <= 1e-12);
    CHECK(iou_binary(p, g) == iou_binary(g, p));
    CHECK(f1_binary(p, g) == f1_binary(g, p));
  }
}

TEST_CASE("metric report") {
  auto r = MetricReport::from("psnr", {1, 2, 3, 4});
  CHECK(r.mean == doctest::Approx(2.5));
  CHECK(r.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(r.count() == 4);
  auto inf = MetricReport::from("psnr", {INFINITY, INFINITY});
  CHECK(std::isinf(inf.mean));
  CHECK(inf.std == 0);
  CHECK(MetricReport::from("x", {3}).std == 0);
}

TEST_CASE("fourier shift") {
  for (Index n : {9, 15, 33}) {
    Image x = random_image(4, n, std::uint64_t(n));
    Image there = fourier_shift_rows(x, 0.25);
    Image back = fourier_shift_rows(there, -0.25);
    CHECK((back - x).abs().maxCoeff() <= 1e-6);
    // whole-pixel shift is a rotation of the row
    Image one = fourier_shift_rows(x, 1.0);
    for (Index l = 0; l < n; ++l) CHECK(one(2, l) == doctest::Approx(x(2, (l + 1) % n)).epsilon(1e-9));
  }
  // a pure cosine at one bin moves by its phase
  const Index n = 16;
  Image c(1, n);
  for (Index l = 0; l < n; ++l) c(0, l) = std::cos(2 * std::numbers::pi * 3 * l / n);
  Image s = fourier_shift_rows(c, 0.3);
  for (Index l = 0; l < n; ++l) CHECK(s(0, l) == doctest::Approx(std::cos(2 * std::numbers::pi * 3 * (l + 0.3) / n)));
}

TEST_CASE("kellner deringing") {
  SUBCASE("constant image is unchanged") {
    for (double v : {0.0, 0.37, 1.0}) {
      Image c = Image::Constant(21, 24, v);
      CHECK((kellner_dering(c) - v).abs().maxCoeff() <= 1e-9);
    }
  }
  SUBCASE("ringing step edge loses total variation") {
    Phantom ph;
    ph.shapes.push_back({Primitive::Kind::rectangle, 0.5, 0.5, 0.22, 0.3, 0.3, 0.9});
    Image i0 = kspace_crop(render(ph, 101, 101), 57, 57);
    Image out = kellner_dering(i0);
    CHECK(total_variation(out) < total_variation(i0));
  }
  SUBCASE("errors") {
    Image x = Image::Zero(8, 8);
    x(3, 3) = NAN;
    CHECK_THROWS_AS(kellner_dering(x), DataError);
    CHECK_THROWS_AS(kellner_dering(Image::Zero(8, 8), {.shifts = 0}), ConfigError);
  }
}
