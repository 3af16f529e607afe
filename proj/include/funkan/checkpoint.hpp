#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "funkan/models.hpp"

namespace funkan {

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct StatsRecord {
  std::string name;
  std::vector<float> mean, var;
  bool initialized = false;
};

/// Everything needed to rebuild a model: spec, seed, named parameters and
/// batch-norm statistics. On disk: <stem>.json manifest with byte offsets
/// into <stem>.bin, a little-endian float32 blob.
struct Checkpoint {
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::vector<TensorRecord> parameters;
  std::vector<StatsRecord> buffers;
};

void write_checkpoint(const std::filesystem::path& stem, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& stem);

inline constexpr const char* kCheckpointFormat = "funkan-checkpoint-1";

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& json);

template <typename Scalar>
Checkpoint snapshot(Model<Scalar>& model, std::uint64_t seed) {
  Checkpoint ckpt{model.spec(), seed, {}, {}};
  auto set = model.parameters();
  for (const auto& p : set.parameters) {
    TensorRecord r{p.name, p.tensor.shape(), {}};
    r.values.reserve(std::size_t(p.tensor.numel()));
    for (Index i = 0; i < p.tensor.numel(); ++i) r.values.push_back(float(p.tensor[i]));
    ckpt.parameters.push_back(std::move(r));
  }
  for (const auto& b : set.buffers) {
    StatsRecord r{b.name, {}, {}, b.stats->initialized};
    for (Index i = 0; i < b.stats->mean.size(); ++i) {
      r.mean.push_back(float(b.stats->mean[i]));
      r.var.push_back(float(b.stats->var[i]));
    }
    ckpt.buffers.push_back(std::move(r));
  }
  return ckpt;
}

/// Copies values into a model built from the same spec; names and shapes
/// must match one to one (DataError otherwise).
template <typename Scalar>
void restore(Model<Scalar>& model, const Checkpoint& ckpt) {
  auto set = model.parameters();
  if (set.parameters.size() != ckpt.parameters.size() || set.buffers.size() != ckpt.buffers.size())
    throw DataError("checkpoint: parameter table does not match the model");
  for (std::size_t i = 0; i < set.parameters.size(); ++i) {
    auto& p = set.parameters[i];
    const auto& r = ckpt.parameters[i];
    if (p.name != r.name || p.tensor.shape() != r.shape)
      throw DataError("checkpoint: expected " + p.name + " " + to_string(p.tensor.shape()) + ", found " + r.name +
                      " " + to_string(r.shape));
    for (Index k = 0; k < p.tensor.numel(); ++k) p.tensor[k] = Scalar(r.values[std::size_t(k)]);
  }
  for (std::size_t i = 0; i < set.buffers.size(); ++i) {
    auto& b = set.buffers[i];
    const auto& r = ckpt.buffers[i];
    if (b.name != r.name || std::size_t(b.stats->mean.size()) != r.mean.size())
      throw DataError("checkpoint: statistics " + r.name + " do not match " + b.name);
    for (std::size_t k = 0; k < r.mean.size(); ++k) {
      b.stats->mean[Index(k)] = Scalar(r.mean[k]);
      b.stats->var[Index(k)] = Scalar(r.var[k]);
    }
    b.stats->initialized = r.initialized;
  }
}

template <typename Scalar>
std::unique_ptr<Model<Scalar>> load_model(const std::filesystem::path& stem) {
  const Checkpoint ckpt = read_checkpoint(stem);
  auto model = build<Scalar>(ckpt.spec, ckpt.seed);
  restore(*model, ckpt);
  return model;
}

}  // namespace funkan
