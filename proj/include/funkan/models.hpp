#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "funkan/funkan_block.hpp"
#include "funkan/layers.hpp"
#include "funkan/ops.hpp"

namespace funkan {

/// Architecture description. `channels` is the backbone width {n} for
/// "enhance" and the encoder widths {C1, C2, C3} for "ufunkan"; empty means
/// the default for that architecture.
struct ModelSpec {
  std::string name = "enhance";
  std::vector<Index> channels;
  Index in_channels = 1;
  Index out_channels = 1;
  int basis_size = 6;
  double grid_extent = 3.0;
  AttentionNorm norm = AttentionNorm::softmax;
  // Replace every FunKAN block by the identity (architecture harness self-test).
  bool identity_backbone = false;
};

inline const char* to_string(AttentionNorm kind) {
  switch (kind) {
    case AttentionNorm::softmax: return "softmax";
    case AttentionNorm::l1: return "l1";
    case AttentionNorm::l2: return "l2";
    case AttentionNorm::raw: return "raw";
  }
  return "?";
}

inline AttentionNorm parse_attention_norm(const std::string& s) {
  if (s == "softmax") return AttentionNorm::softmax;
  if (s == "l1") return AttentionNorm::l1;
  if (s == "l2") return AttentionNorm::l2;
  if (s == "raw") return AttentionNorm::raw;
  throw ConfigError("unknown attention normalization '" + s + "' (softmax, l1, l2, raw)");
}

/// Fills defaults and validates; throws ConfigError.
inline ModelSpec resolve(ModelSpec spec) {
  if (spec.name == "enhance") {
    if (spec.channels.empty()) spec.channels = {32};
    if (spec.channels.size() != 1) throw ConfigError("enhance: expected one backbone width");
  } else if (spec.name == "ufunkan") {
    if (spec.channels.empty()) spec.channels = {32, 64, 128};
    if (spec.channels.size() != 3) throw ConfigError("ufunkan: expected three encoder widths C1,C2,C3");
  } else {
    throw ConfigError("unknown model '" + spec.name + "' (enhance, ufunkan)");
  }
  for (Index c : spec.channels)
    if (c < 1) throw ConfigError(spec.name + ": channel widths must be strictly positive");
  if (spec.in_channels < 1 || spec.out_channels < 1) throw ConfigError(spec.name + ": channel counts must be positive");
  if (spec.basis_size < 1) throw ConfigError(spec.name + ": basis size must be at least 1");
  if (!(spec.grid_extent > 0)) throw ConfigError(spec.name + ": grid extent must be positive");
  return spec;
}

// Flop convention: convolutions 2 * kH kW Cin * Cout per output pixel,
// batch norm 2 per element, FunKAN blocks as documented on FunKanBlock::flops.
// Activations, additions and resampling are free.
template <typename Scalar>
class Model {
 public:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {}
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  virtual Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) = 0;
  virtual void collect(ParameterSet<Scalar>& set) = 0;
  /// Per-layer table for an input of shape [N, C, h, w].
  virtual std::vector<LayerCost> costs(const Shape& input) = 0;
  /// Throws ShapeError when the input cannot be processed.
  virtual void check_input(const Shape& input) const = 0;
  virtual std::vector<FunKanBlock<Scalar>*> backbone() = 0;

  Tensor<Scalar> operator()(const Tensor<Scalar>& x, Mode mode) { return forward(x, mode); }

  ParameterSet<Scalar> parameters() {
    ParameterSet<Scalar> set;
    collect(set);
    return set;
  }

  const ModelSpec& spec() const { return spec_; }

 protected:
  void check_channels(const Shape& input) const {
    if (input.size() != 4) throw ShapeError(spec_.name + ": expected [N, C, h, w] input, got " + to_string(input));
    if (input[1] != spec_.in_channels)
      throw ShapeError(spec_.name + ": expected " + std::to_string(spec_.in_channels) + " input channels, got " +
                       to_string(input));
  }

  ModelSpec spec_;
};

template <typename Scalar>
Index count_params(Model<Scalar>& model) {
  return model.parameters().count();
}

template <typename Scalar>
std::int64_t count_flops(Model<Scalar>& model, const Shape& input) {
  std::int64_t total = 0;
  for (const auto& c : model.costs(input)) total += c.flops;
  return total;
}

namespace detail {

template <typename Scalar>
LayerCost bn_cost(const BatchNorm2d<Scalar>& bn, const std::string& name, Index n, Index h, Index w) {
  return {name, "batchnorm", {n, bn.gamma.numel(), h, w}, bn.param_count(), bn.flops(n, h, w)};
}

template <typename Scalar>
LayerCost block_cost(const FunKanBlock<Scalar>& block, const std::string& name, Index n, Index h, Index w) {
  return {name, "funkan r=" + std::to_string(block.options().basis_size),
          {n, block.options().out_channels, h, w}, block.param_count(), block.flops(n, h, w)};
}

}  // namespace detail

/// Pre-activation residual block.
///   down: a = ReLU(BN(x)); y = conv3x3(ReLU(BN(conv3x3/s2(a)))) + conv1x1/s2(a)
///   up:   u = upsample2x(x); a = ReLU(BN(u));
///         y = conv3x3(ReLU(BN(conv3x3(a)))) + (Cin == Cout ? u : conv1x1(a))
template <typename Scalar>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(Index cin, Index cout, bool down, Rng& rng)
      : down_(down),
        bn1(cin),
        conv1(cin, cout, 3, rng, true, down ? 2 : 1),
        bn2(cout),
        conv2(cout, cout, 3, rng) {
    if (down || cin != cout) shortcut = Conv2d<Scalar>(cin, cout, 1, rng, true, down ? 2 : 1);
  }

  Tensor<Scalar> operator()(const Tensor<Scalar>& x, Mode mode) {
    Tensor<Scalar> u = down_ ? x : upsample_nearest2x(x);
    Tensor<Scalar> a = relu(bn1(u, mode));
    Tensor<Scalar> main = conv2(relu(bn2(conv1(a), mode)));
    return main + (has_shortcut() ? shortcut(a) : u);
  }

  bool has_shortcut() const { return shortcut.weight.defined(); }

  void collect(ParameterSet<Scalar>& set, const std::string& prefix) {
    bn1.collect(set, prefix + ".bn1");
    conv1.collect(set, prefix + ".conv1");
    bn2.collect(set, prefix + ".bn2");
    conv2.collect(set, prefix + ".conv2");
    if (has_shortcut()) shortcut.collect(set, prefix + ".shortcut");
  }

  // (h, w) is the block input; output extent is halved or doubled.
  void append_costs(std::vector<LayerCost>& out, const std::string& prefix, Index n, Index h, Index w) const {
    if (!down_) h *= 2, w *= 2;
    out.push_back(detail::bn_cost(bn1, prefix + ".bn1", n, h, w));
    out.push_back(conv1.cost(prefix + ".conv1", n, h, w));
    const Index oh = conv1.out_extent(h), ow = conv1.out_extent(w);
    out.push_back(detail::bn_cost(bn2, prefix + ".bn2", n, oh, ow));
    out.push_back(conv2.cost(prefix + ".conv2", n, oh, ow));
    if (has_shortcut()) out.push_back(shortcut.cost(prefix + ".shortcut", n, h, w));
  }

 private:
  bool down_ = true;

 public:
  BatchNorm2d<Scalar> bn1;
  Conv2d<Scalar> conv1;
  BatchNorm2d<Scalar> bn2;
  Conv2d<Scalar> conv2;
  Conv2d<Scalar> shortcut;
};

/// embed 5x5 -> lift 3x3 -> three residual FunKAN blocks -> project 3x3 -> restore 1x1.
/// Every convolution after the first sees a ReLU-activated input.
template <typename Scalar>
class EnhancementNet final : public Model<Scalar> {
 public:
  EnhancementNet(const ModelSpec& spec, Rng& rng) : Model<Scalar>(spec) {
    const Index n = spec.channels[0];
    embed = Conv2d<Scalar>(spec.in_channels, 16, 5, rng);
    lift = Conv2d<Scalar>(16, n, 3, rng);
    if (!spec.identity_backbone)
      for (int i = 0; i < 3; ++i)
        blocks.emplace_back(FunKanOptions{.channels = n, .out_channels = n, .basis_size = spec.basis_size,
                                          .grid_extent = spec.grid_extent, .norm = spec.norm},
                            rng, "backbone." + std::to_string(i));
    project = Conv2d<Scalar>(n, 16, 3, rng);
    restore = Conv2d<Scalar>(16, spec.out_channels, 1, rng);
  }

  void check_input(const Shape& s) const override {
    this->check_channels(s);
    if (s[2] < 8 || s[3] < 8) throw ShapeError("enhance: spatial dims must be at least 8, got " + to_string(s));
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override {
    check_input(x.shape());
    Tensor<Scalar> h = lift(relu(embed(x)));
    for (auto& block : blocks) h = h + block(h, mode);
    return restore(relu(project(relu(h))));
  }

  void collect(ParameterSet<Scalar>& set) override {
    embed.collect(set, "embed");
    lift.collect(set, "lift");
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(set, "backbone." + std::to_string(i));
    project.collect(set, "project");
    restore.collect(set, "restore");
  }

  std::vector<LayerCost> costs(const Shape& s) override {
    check_input(s);
    const Index n = s[0], h = s[2], w = s[3];
    std::vector<LayerCost> out{embed.cost("embed", n, h, w), lift.cost("lift", n, h, w)};
    for (std::size_t i = 0; i < blocks.size(); ++i)
      out.push_back(detail::block_cost(blocks[i], "backbone." + std::to_string(i), n, h, w));
    out.push_back(project.cost("project", n, h, w));
    out.push_back(restore.cost("restore", n, h, w));
    return out;
  }

  std::vector<FunKanBlock<Scalar>*> backbone() override {
    std::vector<FunKanBlock<Scalar>*> out;
    for (auto& b : blocks) out.push_back(&b);
    return out;
  }

  Conv2d<Scalar> embed, lift, project, restore;
  std::vector<FunKanBlock<Scalar>> blocks;
};

/// U-shaped segmentation network with a FunKAN bottleneck.
///   embed 3x3 -> 4 down blocks [C1, C2, C3, C3] -> 3 residual FunKAN blocks
///   -> 4 up blocks [C3, C2, C1, 16], each followed by an additive skip from
///   the encoder stage at the same resolution -> head 1x1 on ReLU.
/// Decoder outputs always match their skip's width, so the channel-matching
/// projection is only materialized if they differ.
template <typename Scalar>
class UFunKanNet final : public Model<Scalar> {
 public:
  static constexpr Index kDivisor = 16;

  UFunKanNet(const ModelSpec& spec, Rng& rng) : Model<Scalar>(spec) {
    const Index c1 = spec.channels[0], c2 = spec.channels[1], c3 = spec.channels[2];
    enc_widths_ = {c1, c2, c3, c3};
    embed = Conv2d<Scalar>(spec.in_channels, 16, 3, rng);
    Index cin = 16;
    for (int s = 0; s < 4; ++s) {
      encoder.emplace_back(cin, enc_widths_[s], true, rng);
      cin = enc_widths_[s];
    }
    if (!spec.identity_backbone)
      for (int i = 0; i < 3; ++i)
        blocks.emplace_back(FunKanOptions{.channels = c3, .out_channels = c3, .basis_size = spec.basis_size,
                                          .grid_extent = spec.grid_extent, .norm = spec.norm},
                            rng, "backbone." + std::to_string(i));
    // skip sources for decoder stages: e3, e2, e1, embed
    const std::vector<Index> skip_widths{c3, c2, c1, 16};
    for (int s = 0; s < 4; ++s) {
      decoder.emplace_back(cin, skip_widths[s], false, rng);
      cin = skip_widths[s];
    }
    head = Conv2d<Scalar>(16, spec.out_channels, 1, rng);
  }

  void check_input(const Shape& s) const override {
    this->check_channels(s);
    if (s[2] % kDivisor != 0 || s[3] % kDivisor != 0 || s[2] == 0 || s[3] == 0)
      throw ShapeError("ufunkan: spatial dims must be positive multiples of " + std::to_string(kDivisor) + ", got " +
                       to_string(s));
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override {
    check_input(x.shape());
    std::vector<Tensor<Scalar>> skips{embed(x)};
    for (auto& stage : encoder) skips.push_back(stage(skips.back(), mode));
    Tensor<Scalar> h = skips.back();
    for (auto& block : blocks) h = h + block(h, mode);
    for (int s = 0; s < 4; ++s) {
      const Tensor<Scalar>& skip = skips[3 - s];
      h = decoder[s](h, mode);
      if (h.shape() != skip.shape())
        throw ShapeError("ufunkan: decoder stage " + std::to_string(s) + " produced " + to_string(h.shape()) +
                         ", skip is " + to_string(skip.shape()));
      h = h + skip;
    }
    return head(relu(h));
  }

  void collect(ParameterSet<Scalar>& set) override {
    embed.collect(set, "embed");
    for (std::size_t s = 0; s < encoder.size(); ++s) encoder[s].collect(set, "encoder." + std::to_string(s));
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(set, "backbone." + std::to_string(i));
    for (std::size_t s = 0; s < decoder.size(); ++s) decoder[s].collect(set, "decoder." + std::to_string(s));
    head.collect(set, "head");
  }

  std::vector<LayerCost> costs(const Shape& s) override {
    check_input(s);
    const Index n = s[0];
    Index h = s[2], w = s[3];
    std::vector<LayerCost> out{embed.cost("embed", n, h, w)};
    for (std::size_t i = 0; i < encoder.size(); ++i) {
      encoder[i].append_costs(out, "encoder." + std::to_string(i), n, h, w);
      h /= 2, w /= 2;
    }
    for (std::size_t i = 0; i < blocks.size(); ++i)
      out.push_back(detail::block_cost(blocks[i], "backbone." + std::to_string(i), n, h, w));
    for (std::size_t i = 0; i < decoder.size(); ++i) {
      decoder[i].append_costs(out, "decoder." + std::to_string(i), n, h, w);
      h *= 2, w *= 2;
    }
    out.push_back(head.cost("head", n, h, w));
    return out;
  }

  std::vector<FunKanBlock<Scalar>*> backbone() override {
    std::vector<FunKanBlock<Scalar>*> out;
    for (auto& b : blocks) out.push_back(&b);
    return out;
  }

  const std::vector<Index>& encoder_widths() const { return enc_widths_; }

  Conv2d<Scalar> embed;
  std::vector<ResidualBlock<Scalar>> encoder;
  std::vector<FunKanBlock<Scalar>> blocks;
  std::vector<ResidualBlock<Scalar>> decoder;
  Conv2d<Scalar> head;

 private:
  std::vector<Index> enc_widths_;
};

/// Deterministic construction: identical (spec, seed) give bitwise-identical parameters.
template <typename Scalar>
std::unique_ptr<Model<Scalar>> build(const ModelSpec& spec, std::uint64_t seed) {
  const ModelSpec resolved = resolve(spec);
  Rng rng(seed);
  if (resolved.name == "enhance") return std::make_unique<EnhancementNet<Scalar>>(resolved, rng);
  return std::make_unique<UFunKanNet<Scalar>>(resolved, rng);
}

}  // namespace funkan
