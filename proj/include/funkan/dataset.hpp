#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "funkan/augment.hpp"

namespace funkan {

struct SplitEntry {
  std::filesystem::path path;  // sample stem, resolved against the CSV directory
  std::string role;            // train, val or test
};

/// CSV with a header naming at least `path` and `role`; other columns are ignored.
std::vector<SplitEntry> read_split(const std::filesystem::path& csv);

/// <stem>_input and <stem>_target: the float32 sidecar when present, else the PNG.
Sample load_sample(const std::filesystem::path& stem);

/// Writes <stem>_{input,target}.png (16-bit) and .f32 sidecars.
void save_sample(const std::filesystem::path& stem, const Image& input, const Image& target);

struct Dataset {
  std::vector<Sample> train, val, test;
};

/// Throws DataError on a missing file or an empty training split.
Dataset load_dataset(const std::filesystem::path& csv);

}  // namespace funkan
