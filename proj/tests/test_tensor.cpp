#include "doctest.h"

#include <random>

#include "funkan/ops.hpp"
#include "gradcheck.hpp"

using namespace funkan;
using funkan::testing::gradcheck;
using funkan::testing::random_tensor;

TEST_CASE("tensor shape invariants") {
  Tensor<float> t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.data().size() == 24);
  CHECK_THROWS_AS(Tensor<float>({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 2}, Eigen::ArrayXf::Zero(3)), ShapeError);
  CHECK_THROWS_AS(t.reshape({5, 5}), ShapeError);
  CHECK(t.reshape({4, 6}).shape() == Shape{4, 6});
}

TEST_CASE("elementwise arithmetic") {
  Tensor<double> a({2}, {1, 2}), b({2}, {3, 4});
  auto c = a + b;
  CHECK(c[0] == 4);
  CHECK(c[1] == 6);

  std::mt19937_64 rng(3);
  auto x = random_tensor({3, 5}, rng);
  auto y = x * 1.0;
  CHECK((y.data() == x.data()).all());

  Tensor<double> p({3}), q({4});
  try {
    (void)(p + q);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[3]") != std::string::npos);
    CHECK(msg.find("[4]") != std::string::npos);
  }
}

TEST_CASE("d(x*y)/dx equals y") {
  Tensor<double> x({1}, {2.0}), y({1}, {3.0});
  x.set_requires_grad();
  y.set_requires_grad();
  backward(sum(x * y));
  CHECK(x.grad()[0] == doctest::Approx(3.0));
  CHECK(y.grad()[0] == doctest::Approx(2.0));
  // finite-difference oracle with step 1e-6
  const double h = 1e-6;
  const double fd = ((2.0 + h) * 3.0 - (2.0 - h) * 3.0) / (2 * h);
  CHECK(x.grad()[0] == doctest::Approx(fd).epsilon(1e-8));
}

TEST_CASE("backward basics") {
  Tensor<double> x({4}, {1, -2, 3, 0.5});
  x.set_requires_grad();
  backward(sum(x));
  CHECK((x.grad() == 1.0).all());

  Tensor<double> z({2}, {1, 2});
  z.set_requires_grad();
  backward(sum(z * z));
  CHECK(z.grad()[0] == doctest::Approx(2));
  CHECK(z.grad()[1] == doctest::Approx(4));

  SUBCASE("non-scalar loss is rejected") {
    Tensor<double> w({2}, {1, 2});
    w.set_requires_grad();
    CHECK_THROWS_AS(backward(w * 2.0), ShapeError);
  }
  SUBCASE("a second sweep needs zero_grad") {
    CHECK_THROWS_AS(backward(sum(z * z)), std::logic_error);
    z.zero_grad();
    backward(sum(z * z));
    CHECK(z.grad()[1] == doctest::Approx(4));
  }
}

TEST_CASE("relu softmax upsample") {
  Tensor<double> x({3}, {-1, 0, 2});
  auto r = relu(x);
  CHECK(r[0] == 0);
  CHECK(r[1] == 0);
  CHECK(r[2] == 2);

  x.set_requires_grad();
  backward(sum(relu(x)));
  CHECK(x.grad()[1] == 0);  // subgradient at 0

  auto s = softmax(Tensor<double>({1, 3}, 0.0), 1);
  for (int i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(1.0 / 3));
  CHECK_THROWS_AS(softmax(Tensor<double>({1, 3}), 2), ShapeError);

  Tensor<double> img({1, 1, 2, 2}, {1, 2, 3, 4});
  auto up = upsample_nearest2x(img);
  const double expected[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  REQUIRE(up.shape() == Shape{1, 1, 4, 4});
  for (int i = 0; i < 16; ++i) CHECK(up[i] == expected[i]);
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  std::mt19937_64 rng(11);
  auto a = random_tensor({5, 6}, rng, -4, 4);
  auto s = softmax(a, 1);
  auto shifted = softmax(a + 7.5, 1);
  for (Index i = 0; i < 5; ++i) {
    CHECK(s.data().segment(i * 6, 6).sum() == doctest::Approx(1.0).epsilon(1e-12));
    Index am1, am2;
    s.data().segment(i * 6, 6).maxCoeff(&am1);
    shifted.data().segment(i * 6, 6).maxCoeff(&am2);
    CHECK(am1 == am2);
  }
  CHECK((s.data() - shifted.data()).abs().maxCoeff() < 1e-6);
}

TEST_CASE("op gradients agree with central differences") {
  std::mt19937_64 rng(5);
  auto a = random_tensor({3, 4}, rng).set_requires_grad();
  auto b = random_tensor({3, 4}, rng, 0.5, 1.5).set_requires_grad();
  auto w = random_tensor({4, 2}, rng).set_requires_grad();
  auto probe = random_tensor({3, 4}, rng);
  auto probe2 = random_tensor({3, 2}, rng);

  SUBCASE("add sub mul div") {
    auto r = gradcheck([&] { return sum(((a + b) * (a - b) / b) * probe); }, {{"a", a}, {"b", b}});
    CHECK(r.worst_error < 1e-4);
  }
  SUBCASE("scalar ops and square") {
    auto r = gradcheck([&] { return sum(square(a * 3.0 - 0.5) / 2.0 + a); }, {{"a", a}});
    CHECK(r.worst_error < 1e-4);
  }
  SUBCASE("softmax") {
    auto r = gradcheck([&] { return sum(softmax(a, 1) * probe); }, {{"a", a}});
    CHECK(r.worst_error < 1e-4);
    r = gradcheck([&] { return sum(softmax(a, 0) * probe); }, {{"a", a}});
    CHECK(r.worst_error < 1e-4);
  }
  SUBCASE("matmul") {
    auto r = gradcheck([&] { return sum(matmul(a, w) * probe2); }, {{"a", a}, {"w", w}});
    CHECK(r.worst_error < 1e-4);
  }
  SUBCASE("relu and sigmoid") {
    auto r = gradcheck([&] { return sum(relu(a) * probe + sigmoid(a * 2.0)); }, {{"a", a}});
    CHECK(r.worst_error < 1e-4);
  }
  SUBCASE("bce with logits") {
    Tensor<double> t({3, 4});
    for (Index i = 0; i < t.numel(); ++i) t[i] = (i % 3 == 0) ? 1.0 : 0.0;
    auto r = gradcheck([&] { return sum(bce_with_logits(a * 4.0, t)); }, {{"a", a}});
    CHECK(r.worst_error < 1e-4);
  }
  SUBCASE("channel ops") {
    auto x = random_tensor({2, 4, 3, 3}, rng).set_requires_grad();
    auto cw = random_tensor({4}, rng).set_requires_grad();
    auto p4 = random_tensor({2, 2, 6, 6}, rng);
    auto r = gradcheck(
        [&] { return sum(upsample_nearest2x(slice_channels(scale_channels(x, cw), 1, 2)) * p4); },
        {{"x", x}, {"w", cw}});
    CHECK(r.worst_error < 1e-4);
    auto col = gradcheck([&] { return sum(column(a, 2) * column(a, 0)); }, {{"a", a}});
    CHECK(col.worst_error < 1e-4);
    auto ps = gradcheck([&] { return sum(sum_per_sample(x) * sum_per_sample(x)); }, {{"x", x}});
    CHECK(ps.worst_error < 1e-4);
  }
}

TEST_CASE("forward is pure") {
  std::mt19937_64 rng(9);
  auto a = random_tensor({4, 4}, rng);
  auto f = [&] { return softmax(matmul(a, a), 1); };
  CHECK((f().data() == f().data()).all());
}

TEST_CASE("no-grad mode records nothing") {
  Tensor<double> x({2}, {1, 2});
  x.set_requires_grad();
  NoGradGuard guard;
  auto y = x * 2.0;
  CHECK_FALSE(y.requires_grad());
  CHECK(y.is_leaf());
}
