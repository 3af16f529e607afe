#include "doctest.h"

#include <cstring>
#include <random>

#include "funkan/models.hpp"
#include "gradcheck.hpp"

using namespace funkan;
using funkan::testing::gradcheck;
using funkan::testing::random_tensor;

namespace {

// Closed-form parameter counts, written out independently of the layer code.
Index conv_params(Index k, Index cin, Index cout, bool bias = true) { return k * k * cin * cout + (bias ? cout : 0); }
Index bn_params(Index c) { return 2 * c; }
Index block_params(Index n, Index r) {
  return n * r + conv_params(3, n, 2 * n, false) + conv_params(3, n, n) + conv_params(3, n, 2 * n) + 3 * bn_params(n) +
         conv_params(1, n, n);
}
Index down_params(Index cin, Index cout) {
  return bn_params(cin) + conv_params(3, cin, cout) + bn_params(cout) + conv_params(3, cout, cout) +
         conv_params(1, cin, cout);
}
Index up_params(Index cin, Index cout) {
  return bn_params(cin) + conv_params(3, cin, cout) + bn_params(cout) + conv_params(3, cout, cout) +
         (cin != cout ? conv_params(1, cin, cout) : 0);
}

template <typename S>
std::vector<S> blob(Model<S>& m) {
  std::vector<S> out;
  for (auto& p : m.parameters().parameters)
    for (Index i = 0; i < p.tensor.numel(); ++i) out.push_back(p.tensor[i]);
  return out;
}

}  // namespace

TEST_CASE("single-layer counters") {
  Rng rng(0);
  Conv2d<float> conv(16, 32, 3, rng);
  CHECK(conv.param_count() == 4640);
  CHECK(conv.flops(10, 10) == 921600);
  CHECK(conv.flops(10, 10) == 2 * (3 * 3 * 16) * 32 * 100);
}

TEST_CASE("build") {
  SUBCASE("ufunkan encoder widths") {
    auto m = build<float>({.name = "ufunkan", .channels = {32, 64, 128}}, 1);
    auto& u = dynamic_cast<UFunKanNet<float>&>(*m);
    CHECK(u.encoder_widths() == std::vector<Index>{32, 64, 128, 128});
    CHECK(u.blocks.size() == 3);
    CHECK(u.blocks[0].options().channels == 128);
    CHECK(count_params(*m) == conv_params(3, 1, 16) + down_params(16, 32) + down_params(32, 64) +
                                  down_params(64, 128) + down_params(128, 128) + 3 * block_params(128, 6) +
                                  up_params(128, 128) + up_params(128, 64) + up_params(64, 32) + up_params(32, 16) +
                                  conv_params(1, 16, 1));
    MESSAGE("ufunkan params: ", count_params(*m));
  }
  SUBCASE("enhance backbone") {
    auto m = build<float>({.name = "enhance"}, 1);
    auto blocks = m->backbone();
    REQUIRE(blocks.size() == 3);
    for (auto* b : blocks) {
      CHECK(b->options().channels == 32);
      CHECK(b->options().basis_size == 6);
    }
    CHECK(count_params(*m) == conv_params(5, 1, 16) + conv_params(3, 16, 32) + 3 * block_params(32, 6) +
                                  conv_params(3, 32, 16) + conv_params(1, 16, 1));
    MESSAGE("enhance params: ", count_params(*m));
  }
  SUBCASE("same seed gives bitwise-equal parameters") {
    for (const char* name : {"enhance", "ufunkan"}) {
      auto a = blob(*build<float>({.name = name}, 42));
      auto b = blob(*build<float>({.name = name}, 42));
      auto c = blob(*build<float>({.name = name}, 43));
      REQUIRE(a.size() == b.size());
      CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
      CHECK(a != c);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(build<float>({.name = "unet"}, 1), ConfigError);
    CHECK_THROWS_AS(build<float>({.name = "ufunkan", .channels = {32, 0, 128}}, 1), ConfigError);
    CHECK_THROWS_AS(build<float>({.name = "ufunkan", .channels = {32, 64}}, 1), ConfigError);
    CHECK_THROWS_AS(build<float>({.name = "enhance", .channels = {-4}}, 1), ConfigError);
  }
}

TEST_CASE("forward shape contracts") {
  SUBCASE("ufunkan 256x256") {
    auto m = build<float>({.name = "ufunkan"}, 3);
    auto y = m->forward(Tensor<float>({1, 1, 256, 256}, 0.5f), Mode::train);
    CHECK(y.shape() == Shape{1, 1, 256, 256});
  }
  SUBCASE("enhance 145x145") {
    auto m = build<float>({.name = "enhance"}, 3);
    std::mt19937_64 g(1);
    Tensor<float> x({1, 1, 145, 145});
    for (Index i = 0; i < x.numel(); ++i) x[i] = float(g() % 1000) / 1000.0f;
    auto y = m->forward(x, Mode::eval);
    CHECK(y.shape() == Shape{1, 1, 145, 145});
    auto y2 = m->forward(x, Mode::eval);
    CHECK(std::memcmp(y.data().data(), y2.data().data(), sizeof(float) * y.numel()) == 0);
  }
  SUBCASE("indivisible sizes name the divisor") {
    auto m = build<float>({.name = "ufunkan", .channels = {4, 4, 8}}, 3);
    try {
      m->forward(Tensor<float>({1, 1, 40, 48}), Mode::eval);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("16") != std::string::npos);
    }
    CHECK_THROWS_AS(m->forward(Tensor<float>({1, 2, 32, 32}), Mode::eval), ShapeError);
    auto e = build<float>({.name = "enhance", .channels = {4}}, 3);
    CHECK_THROWS_AS(e->forward(Tensor<float>({1, 1, 7, 32}), Mode::eval), ShapeError);
  }
  SUBCASE("identity backbone preserves every contract") {
    for (auto [h, w] : {std::pair<Index, Index>{16, 16}, {32, 48}, {64, 16}, {80, 112}}) {
      auto m = build<float>({.name = "ufunkan", .channels = {4, 8, 8}, .identity_backbone = true}, 5);
      CHECK(m->backbone().empty());
      auto y = m->forward(Tensor<float>({2, 1, h, w}, 0.1f), Mode::train);
      CHECK(y.shape() == Shape{2, 1, h, w});
      auto full = build<float>({.name = "ufunkan", .channels = {4, 8, 8}}, 5);
      CHECK(full->forward(Tensor<float>({2, 1, h, w}, 0.1f), Mode::train).shape() == Shape{2, 1, h, w});
    }
    for (Index s : {8, 9, 23}) {
      auto m = build<float>({.name = "enhance", .channels = {4}, .identity_backbone = true}, 5);
      CHECK(m->forward(Tensor<float>({1, 1, s, s + 3}, 0.1f), Mode::eval).shape() == Shape{1, 1, s, s + 3});
    }
  }
}

TEST_CASE("flop table") {
  auto m = build<float>({.name = "enhance"}, 1);
  auto table = m->costs({1, 1, 10, 10});
  CHECK(table.front().name == "embed");
  CHECK(table.front().flops == 2 * 25 * 16 * 100);
  CHECK(table[1].flops == 921600);
  Index params = 0;
  for (auto& c : table) params += c.params;
  CHECK(params == count_params(*m));
  CHECK(count_flops(*m, {2, 1, 10, 10}) == 2 * count_flops(*m, {1, 1, 10, 10}));

  auto u = build<float>({.name = "ufunkan"}, 1);
  Index uparams = 0;
  for (auto& c : u->costs({1, 1, 64, 64})) uparams += c.params;
  CHECK(uparams == count_params(*u));
  CHECK(u->costs({1, 1, 64, 64}).back().output == Shape{1, 1, 64, 64});
}

TEST_CASE("end-to-end gradients through a tiny u-network") {
  auto m = build<double>({.name = "ufunkan", .channels = {2, 2, 3}, .basis_size = 3}, 7);
  std::mt19937_64 g(8);
  auto x = random_tensor({2, 1, 16, 16}, g).set_requires_grad();
  auto probe = random_tensor({2, 1, 16, 16}, g);
  auto set = m->parameters();
  std::vector<std::pair<std::string, Tensor<double>>> inputs{{"x", x}};
  for (auto& p : set.parameters)
    if (p.name.rfind("encoder.3", 0) == 0 || p.name.rfind("backbone.1", 0) == 0 ||
        p.name.rfind("decoder.0", 0) == 0 || p.name.rfind("head", 0) == 0 || p.name == "embed.weight")
      inputs.emplace_back(p.name, p.tensor);
  auto r = gradcheck([&] { return sum(m->forward(x, Mode::train) * probe); }, inputs, 1e-5, 60);
  INFO("worst: ", r.worst_name, " ", r.worst_error);
  CHECK(r.worst_error <= 1e-3);
}
