#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "funkan/augment.hpp"
#include "funkan/dataset.hpp"
#include "funkan/models.hpp"
#include "funkan/optim.hpp"

namespace funkan {

struct TrainConfig {
  Task task = Task::enhance;
  ModelSpec model{.name = ""};  // empty name: picked from the task
  std::filesystem::path split;  // CSV with path,role columns
  int epochs = 30;
  int batch_size = 8;
  LrSchedule lr;
  AugmentConfig augment;
  bool pixel_mean_loss = false;  // enhance only
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs between extra checkpoints; 0 keeps only best and last
  int val_every = 1;

  /// Fills defaults (model name from the task, LR boundaries) and validates.
  void resolve();
};

/// YAML mirror of TrainConfig; relative split paths resolve against the file.
/// Keys present in the file override the corresponding fields of `defaults`.
TrainConfig load_train_config(const std::filesystem::path& yaml, TrainConfig defaults = {});
TrainConfig parse_train_config(const std::string& yaml, const std::filesystem::path& base = {},
                               TrainConfig defaults = {});
std::string to_yaml(const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  std::optional<double> val_metric;  // validation loss
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<double> step_losses;
  int best_epoch = -1;
  double best_val = 0;
};

/// Called after every epoch; returning false ends training after that epoch.
using EpochHook = std::function<bool(const EpochLog&, Model<float>&)>;

/// Trains from scratch and writes metrics.csv, steps.csv and best/last
/// checkpoints (plus epoch_<k> at the configured cadence) into `out`.
TrainResult train(TrainConfig cfg, const Dataset& data, const std::filesystem::path& out,
                  std::ostream* progress = nullptr, const EpochHook& on_epoch = {});

/// Eval-mode forward over same-sized images.
std::vector<Image> predict(Model<float>& model, const std::vector<Image>& inputs, int batch_size = 8);

/// Mean per-batch loss in eval mode.
double evaluate_loss(Model<float>& model, const std::vector<Sample>& samples, Task task, bool pixel_mean,
                     int batch_size = 8);

}  // namespace funkan
