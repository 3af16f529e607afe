#include "doctest.h"

#include <random>

#include "funkan/conv.hpp"
#include "gradcheck.hpp"

using namespace funkan;
using funkan::testing::gradcheck;
using funkan::testing::naive_conv2d;
using funkan::testing::random_tensor;

TEST_CASE("1x1 identity kernel reproduces the input") {
  std::mt19937_64 rng(1);
  auto x = random_tensor({2, 3, 5, 4}, rng);
  Tensor<double> k({1, 1, 3, 3});
  for (Index c = 0; c < 3; ++c) k[c * 3 + c] = 1;
  auto y = conv2d(x, k, Tensor<double>({3}, 0.0));
  CHECK((y.data() == x.data()).all());
}

TEST_CASE("all-ones 3x3 kernel on a 2x2 image") {
  Tensor<double> x({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor<double> k({3, 3, 1, 1}, 1.0);
  auto y = conv2d(x, k);
  auto oracle = naive_conv2d(x, k, nullptr, 1, 1, 1, 2, 2);
  for (int i = 0; i < 4; ++i) {
    CHECK(oracle[i] == 10.0);
    CHECK(y[i] == oracle[i]);
  }
}

TEST_CASE("conv2d matches the sliding-window oracle") {
  std::mt19937_64 rng(2);
  struct Case {
    Index n, cin, h, w, k, cout, stride;
  };
  for (Case c : {Case{2, 3, 7, 6, 3, 4, 1}, Case{1, 2, 8, 8, 3, 5, 2}, Case{1, 4, 9, 7, 3, 2, 2},
                 Case{2, 1, 6, 5, 5, 3, 1}, Case{1, 3, 5, 5, 1, 2, 1}}) {
    auto x = random_tensor({c.n, c.cin, c.h, c.w}, rng);
    auto k = random_tensor({c.k, c.k, c.cin, c.cout}, rng);
    auto b = random_tensor({c.cout}, rng);
    auto y = conv2d(x, k, b, c.stride, Padding::same);
    const auto ay = conv_axis(c.h, c.k, c.stride, Padding::same), ax = conv_axis(c.w, c.k, c.stride, Padding::same);
    CHECK(ay.out == (c.h + c.stride - 1) / c.stride);
    auto oracle = naive_conv2d(x, k, &b, c.stride, ay.pad_before, ax.pad_before, ay.out, ax.out);
    REQUIRE(y.numel() == Index(oracle.size()));
    double worst = 0;
    for (Index i = 0; i < y.numel(); ++i) worst = std::max(worst, std::abs(y[i] - oracle[i]));
    CHECK(worst < 1e-12);

    auto yv = conv2d(x, k, b, c.stride, Padding::valid);
    const Index vh = (c.h - c.k) / c.stride + 1, vw = (c.w - c.k) / c.stride + 1;
    auto ov = naive_conv2d(x, k, &b, c.stride, 0, 0, vh, vw);
    REQUIRE(yv.shape() == Shape{c.n, c.cout, vh, vw});
    worst = 0;
    for (Index i = 0; i < yv.numel(); ++i) worst = std::max(worst, std::abs(yv[i] - ov[i]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("stride-2 same padding halves even extents") {
  for (Index h : {256, 128, 64, 32, 16, 7}) CHECK(conv_axis(h, 3, 2, Padding::same).out == (h + 1) / 2);
}

TEST_CASE("conv2d rejects bad shapes") {
  Tensor<double> x({1, 3, 4, 4});
  CHECK_THROWS_AS(conv2d(x, Tensor<double>({3, 3, 2, 1})), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor<double>({2, 2, 3, 1})), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor<double>({3, 3, 3, 2}), Tensor<double>({3})), ShapeError);
}

TEST_CASE("conv2d gradients") {
  std::mt19937_64 rng(4);
  for (Index stride : {1, 2}) {
    auto x = random_tensor({2, 3, 6, 5}, rng).set_requires_grad();
    auto k = random_tensor({3, 3, 3, 4}, rng).set_requires_grad();
    auto b = random_tensor({4}, rng).set_requires_grad();
    auto probe = random_tensor({2, 4, (6 + stride - 1) / stride, (5 + stride - 1) / stride}, rng);
    auto r = gradcheck([&] { return sum(conv2d(x, k, b, stride) * probe); }, {{"x", x}, {"k", k}, {"b", b}});
    CHECK(r.worst_error < 1e-4);
  }
  auto x = random_tensor({1, 2, 4, 4}, rng).set_requires_grad();
  auto k1 = random_tensor({1, 1, 2, 3}, rng).set_requires_grad();
  auto r = gradcheck([&] { return sum(square(conv2d(x, k1))); }, {{"x", x}, {"k", k1}});
  CHECK(r.worst_error < 1e-4);

  // d sum(conv(x, k)) / dk, central differences with step 1e-5
  auto k = random_tensor({3, 3, 2, 2}, rng).set_requires_grad();
  auto rs = gradcheck([&] { return sum(conv2d(x, k)); }, {{"k", k}}, 1e-5);
  CHECK(rs.worst_error < 1e-4);
}

TEST_CASE("batch norm") {
  SUBCASE("constant channels normalize to zero") {
    Tensor<double> x({2, 2, 3, 3});
    for (Index i = 0; i < x.numel(); ++i) x[i] = (i / 9) % 2 ? 4.0 : -1.5;
    RunningStats<double> stats;
    auto y = batch_norm(x, Tensor<double>({2}, 1.0), Tensor<double>({2}, 0.0), stats, Mode::train);
    CHECK(y.data().abs().maxCoeff() < 1e-6);
  }
  SUBCASE("standardizes mean 5 std 2") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> d(5.0, 2.0);
    Tensor<double> x({4, 1, 8, 8});
    for (Index i = 0; i < x.numel(); ++i) x[i] = d(rng);
    RunningStats<double> stats;
    auto y = batch_norm(x, Tensor<double>({1}, 1.0), Tensor<double>({1}, 0.0), stats, Mode::train);
    const double m = y.data().mean();
    const double sd = std::sqrt((y.data() - m).square().mean());
    CHECK(std::abs(m) < 1e-5);
    CHECK(std::abs(sd - 1.0) < 1e-5);
    // running stats moved by momentum 0.1 from (0, 1)
    CHECK(stats.initialized);
    CHECK(stats.mean[0] == doctest::Approx(0.1 * x.data().mean()));
  }
  SUBCASE("eval mode needs statistics") {
    RunningStats<double> empty;
    Tensor<double> x({1, 1, 2, 2});
    CHECK_THROWS_AS(batch_norm(x, Tensor<double>({1}, 1.0), Tensor<double>({1}, 0.0), empty, Mode::eval),
                    std::logic_error);
    auto stats = RunningStats<double>::identity(1);
    auto y = batch_norm(x + 3.0, Tensor<double>({1}, 1.0), Tensor<double>({1}, 0.0), stats, Mode::eval);
    CHECK(y[0] == doctest::Approx(3.0 / std::sqrt(1.0 + kBatchNormEpsilon)));
  }
  SUBCASE("train and eval gradients") {
    std::mt19937_64 rng(12);
    auto x = random_tensor({3, 2, 4, 3}, rng).set_requires_grad();
    auto g = random_tensor({2}, rng, 0.5, 1.5).set_requires_grad();
    auto b = random_tensor({2}, rng).set_requires_grad();
    auto probe = random_tensor({3, 2, 4, 3}, rng);
    RunningStats<double> stats;
    auto r = gradcheck([&] { return sum(batch_norm(x, g, b, stats, Mode::train) * probe); },
                       {{"x", x}, {"gamma", g}, {"beta", b}});
    CHECK(r.worst_error < 1e-4);
    r = gradcheck([&] { return sum(batch_norm(x, g, b, stats, Mode::eval) * probe); },
                  {{"x", x}, {"gamma", g}, {"beta", b}});
    CHECK(r.worst_error < 1e-4);
  }
}
