#include "doctest.h"

#include <numbers>
#include <random>

#include "funkan/funkan_block.hpp"
#include "gradcheck.hpp"

using namespace funkan;
using funkan::testing::gradcheck;
using funkan::testing::random_tensor;

namespace {

void zero_offsets(OffsetPredictor<double>& op) {
  for (auto* conv : {&op.w0, &op.w1, &op.w2}) {
    conv->weight.data().setZero();
    if (conv->bias.defined()) conv->bias.data().setZero();
  }
}

std::vector<std::pair<std::string, Tensor<double>>> named(ParameterSet<double>& set) {
  std::vector<std::pair<std::string, Tensor<double>>> out;
  for (auto& p : set.parameters) out.emplace_back(p.name, p.tensor);
  return out;
}

}  // namespace

TEST_CASE("offset predictor") {
  Rng rng(1);
  SUBCASE("zero kernels give zero offsets") {
    OffsetPredictor<double> op(4, rng);
    zero_offsets(op);
    std::mt19937_64 g(2);
    auto [dx, dy] = op(random_tensor({2, 4, 5, 5}, g), Mode::train);
    CHECK((dx.data() == 0.0).all());
    CHECK((dy.data() == 0.0).all());
  }
  SUBCASE("output shapes") {
    OffsetPredictor<float> op(32, rng);
    Tensor<float> x({2, 32, 16, 16}, 0.5f);
    auto [dx, dy] = op(x, Mode::eval);
    CHECK(dx.shape() == Shape{2, 32, 16, 16});
    CHECK(dy.shape() == Shape{2, 32, 16, 16});
    CHECK_THROWS_AS(op(Tensor<float>({1, 16, 4, 4}), Mode::eval), ShapeError);
  }
  SUBCASE("parameter gradients") {
    OffsetPredictor<double> op(3, rng);
    std::mt19937_64 g(3);
    auto x = random_tensor({2, 3, 5, 5}, g).set_requires_grad();
    auto px = random_tensor({2, 3, 5, 5}, g), py = random_tensor({2, 3, 5, 5}, g);
    ParameterSet<double> set;
    op.collect(set, "offsets");
    auto inputs = named(set);
    inputs.emplace_back("x", x);
    auto r = gradcheck(
        [&] {
          auto [dx, dy] = op(x, Mode::train);
          return sum(dx * px + dy * py);
        },
        inputs);
    INFO("worst: ", r.worst_name);
    CHECK(r.worst_error <= 1e-3);
  }
}

TEST_CASE("attention matrix") {
  Rng rng(4);
  FunKanBlock<float> block({.channels = 32, .out_channels = 32, .basis_size = 6}, rng);
  auto a = block.attention();
  CHECK(a.rows() == 32);
  CHECK(a.cols() == 6);
  for (Index i = 0; i < a.rows(); ++i) {
    CHECK(a.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
    for (Index k = 0; k < 6; ++k) CHECK(a(i, k) == doctest::Approx(1.0 / 6));
  }
  std::mt19937_64 g(5);
  for (Index i = 0; i < block.attention_logits.numel(); ++i)
    block.attention_logits[i] = float(std::normal_distribution<double>(0, 3)(g));
  a = block.attention();
  for (Index i = 0; i < a.rows(); ++i) CHECK(a.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("row normalizations") {
  std::mt19937_64 g(6);
  auto a = random_tensor({3, 5}, g).set_requires_grad();
  auto probe = random_tensor({3, 5}, g);
  for (AttentionNorm kind : {AttentionNorm::softmax, AttentionNorm::l1, AttentionNorm::l2}) {
    auto r = gradcheck([&] { return sum(normalize_rows(a, kind) * probe); }, {{"a", a}});
    CHECK(r.worst_error < 1e-4);
  }
  auto n1 = normalize_rows(a.detach().reshape({3, 5}) * 0.0 + 1.0, AttentionNorm::l1);
  CHECK(n1.data().segment(0, 5).sum() == doctest::Approx(1.0));
}

TEST_CASE("fused expansion equals the composed basis route") {
  std::mt19937_64 g(7);
  const Index n = 3, r = 4;
  HermiteBasis<double> basis(r);
  auto dqx = random_tensor({2, n, 4, 5}, g, -0.5, 0.5).set_requires_grad();
  auto dqy = random_tensor({2, n, 4, 5}, g, -0.5, 0.5).set_requires_grad();
  auto coeffs = random_tensor({n, r}, g).set_requires_grad();
  auto [qx, qy] = uniform_grid<double>(4, 5, 3.0);
  Tensor<double> qx_full({2, n, 4, 5}), qy_full({2, n, 4, 5});
  for (Index i = 0; i < qx_full.numel(); ++i) {
    qx_full[i] = qx[i % 20];
    qy_full[i] = qy[i % 20];
  }
  auto composed = [&] {
    auto gx = dqx + qx_full, gy = dqy + qy_full;
    Tensor<double> acc = scale_channels(eval_separable_2d(basis, 0, gx, gy), column(coeffs, 0));
    for (int k = 1; k < r; ++k) acc = acc + scale_channels(eval_separable_2d(basis, k, gx, gy), column(coeffs, k));
    return acc;
  };
  auto fused = deformed_hermite_expansion(dqx, dqy, qx, qy, coeffs);
  auto ref = composed();
  CHECK((fused.data() - ref.data()).abs().maxCoeff() < 1e-13);

  auto probe = random_tensor({2, n, 4, 5}, g);
  auto r1 = gradcheck([&] { return sum(deformed_hermite_expansion(dqx, dqy, qx, qy, coeffs) * probe); },
                      {{"dqx", dqx}, {"dqy", dqy}, {"coeffs", coeffs}});
  CHECK(r1.worst_error < 1e-5);
}

TEST_CASE("block forward") {
  Rng rng(8);
  SUBCASE("fixed basis map when offsets vanish") {
    const Index n = 3;
    FunKanBlock<double> block({.channels = n, .out_channels = n, .basis_size = 6, .norm = AttentionNorm::raw}, rng);
    zero_offsets(block.offsets);
    block.attention_logits.data().setZero();
    for (Index i = 0; i < n; ++i) block.attention_logits[i * 6] = 1.0;
    block.mixing.weight.data().setZero();
    for (Index c = 0; c < n; ++c) block.mixing.weight[c * n + c] = 1.0;
    block.mixing.bias.data().setZero();
    std::mt19937_64 g(9);
    auto y = block.forward(random_tensor({2, n, 6, 7}, g), Mode::train);
    auto [qx, qy] = uniform_grid<double>(6, 7, 3.0);
    const double c0 = std::pow(std::numbers::pi, -0.25);
    for (Index b = 0; b < 2; ++b)
      for (Index c = 0; c < n; ++c)
        for (Index p = 0; p < 42; ++p) {
          const double expected = c0 * std::exp(-qx[p] * qx[p] / 2) * c0 * std::exp(-qy[p] * qy[p] / 2);
          CHECK(y[(b * n + c) * 42 + p] == doctest::Approx(expected).epsilon(1e-12));
        }
  }
  SUBCASE("output is constant in x when offsets are frozen at zero") {
    FunKanBlock<double> block({.channels = 4, .out_channels = 5, .basis_size = 6}, rng);
    zero_offsets(block.offsets);
    std::mt19937_64 g(10);
    for (Index i = 0; i < block.attention_logits.numel(); ++i) block.attention_logits[i] = g() % 7 - 3.0;
    auto y1 = block.forward(random_tensor({1, 4, 5, 5}, g), Mode::eval);
    auto y2 = block.forward(random_tensor({1, 4, 5, 5}, g, -5, 5), Mode::eval);
    CHECK((y1.data() == y2.data()).all());
  }
  SUBCASE("shape contract") {
    FunKanBlock<float> block({.channels = 32, .out_channels = 32}, rng);
    auto y = block.forward(Tensor<float>({1, 32, 16, 16}, 0.1f), Mode::train);
    CHECK(y.shape() == Shape{1, 32, 16, 16});
    FunKanBlock<double> narrow({.channels = 2, .out_channels = 3, .basis_size = 3}, rng);
    for (auto [n, h, w] : {std::tuple<Index, Index, Index>{1, 1, 1}, {2, 1, 5}, {3, 4, 1}, {1, 3, 3}}) {
      auto out = narrow.forward(Tensor<double>({n, 2, h, w}, 0.3), Mode::eval);
      CHECK(out.shape() == Shape{n, 3, h, w});
    }
  }
  SUBCASE("non-finite activations name the layer") {
    FunKanBlock<double> block({.channels = 2, .out_channels = 2, .basis_size = 3}, rng, "backbone.2");
    Tensor<double> x({1, 2, 3, 3}, 0.0);
    x[4] = std::numeric_limits<double>::quiet_NaN();
    try {
      block.forward(x, Mode::eval);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("backbone.2") != std::string::npos);
    }
  }
}

TEST_CASE("whole-block gradient check on a toy block") {
  Rng rng(11);
  FunKanBlock<double> block({.channels = 4, .out_channels = 4, .basis_size = 3}, rng);
  std::mt19937_64 g(12);
  for (Index i = 0; i < block.attention_logits.numel(); ++i) block.attention_logits[i] = random_tensor({1}, g)[0];
  auto x = random_tensor({1, 4, 8, 8}, g).set_requires_grad();
  auto probe = random_tensor({1, 4, 8, 8}, g);
  ParameterSet<double> set;
  block.collect(set, "block");
  auto inputs = named(set);
  inputs.emplace_back("x", x);
  auto r = gradcheck([&] { return sum(block.forward(x, Mode::train) * probe); }, inputs);
  INFO("worst: ", r.worst_name, " ", r.worst_error);
  CHECK(r.worst_error <= 1e-3);
}
