#include "funkan/train.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "funkan/checkpoint.hpp"
#include "funkan/fpmode.hpp"
#include "funkan/losses.hpp"

namespace funkan {

namespace {

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& into) {
  if (node[key]) into = node[key].as<T>();
}

Tensor<float> batch_loss(Model<float>& model, const std::vector<Sample>& samples, std::size_t begin,
                         std::size_t end, Task task, bool pixel_mean, Mode mode) {
  std::vector<Image> in, tgt;
  for (std::size_t i = begin; i < end; ++i) {
    in.push_back(samples[i].input);
    tgt.push_back(samples[i].target);
  }
  Tensor<float> pred = model.forward(to_tensor<float>(in), mode);
  Tensor<float> target = to_tensor<float>(tgt);
  return task == Task::enhance ? loss_enhance(pred, target, pixel_mean) : loss_segment(pred, target);
}

}  // namespace

void TrainConfig::resolve() {
  if (model.name.empty()) model.name = task == Task::enhance ? "enhance" : "ufunkan";
  model = funkan::resolve(model);
  if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("train: batch size must be at least 1");
  if (val_every < 1) throw ConfigError("train: val_every must be at least 1");
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be non-negative");
  lr.resolve(epochs);
  augment.validate();
}

TrainConfig parse_train_config(const std::string& text, const std::filesystem::path& base, TrainConfig defaults) {
  TrainConfig cfg = std::move(defaults);
  try {
    const YAML::Node root = YAML::Load(text);
    check_keys(root,
               {"task", "model", "split", "epochs", "batch_size", "lr", "augment", "loss", "seed",
                "checkpoint_every", "val_every"},
               "config");
    if (root["task"]) cfg.task = parse_task(root["task"].as<std::string>());
    if (const auto m = root["model"]) {
      check_keys(m, {"name", "channels", "in_channels", "out_channels", "basis_size", "grid_extent", "norm"},
                 "config.model");
      read(m, "name", cfg.model.name);
      read(m, "channels", cfg.model.channels);
      read(m, "in_channels", cfg.model.in_channels);
      read(m, "out_channels", cfg.model.out_channels);
      read(m, "basis_size", cfg.model.basis_size);
      read(m, "grid_extent", cfg.model.grid_extent);
      if (m["norm"]) cfg.model.norm = parse_attention_norm(m["norm"].as<std::string>());
    }
    if (root["split"]) {
      cfg.split = root["split"].as<std::string>();
      if (cfg.split.is_relative() && !base.empty()) cfg.split = base / cfg.split;
    }
    read(root, "epochs", cfg.epochs);
    read(root, "batch_size", cfg.batch_size);
    read(root, "seed", cfg.seed);
    read(root, "checkpoint_every", cfg.checkpoint_every);
    read(root, "val_every", cfg.val_every);
    if (const auto lr = root["lr"]) {
      check_keys(lr, {"stages", "starts"}, "config.lr");
      read(lr, "stages", cfg.lr.rates);
      read(lr, "starts", cfg.lr.starts);
    }
    if (const auto a = root["augment"]) {
      check_keys(a, {"enabled", "noise_sigma", "hflip", "vflip", "rot90", "transpose"}, "config.augment");
      read(a, "enabled", cfg.augment.enabled);
      read(a, "noise_sigma", cfg.augment.noise_sigma);
      read(a, "hflip", cfg.augment.hflip);
      read(a, "vflip", cfg.augment.vflip);
      read(a, "rot90", cfg.augment.rot90);
      read(a, "transpose", cfg.augment.transpose);
    }
    if (const auto l = root["loss"]) {
      check_keys(l, {"pixel_mean"}, "config.loss");
      read(l, "pixel_mean", cfg.pixel_mean_loss);
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& yaml, TrainConfig defaults) {
  std::ifstream in(yaml);
  if (!in) throw ConfigError("cannot open config '" + yaml.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), yaml.parent_path(), std::move(defaults));
}

std::string to_yaml(const TrainConfig& cfg) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "task" << YAML::Value << to_string(cfg.task);
  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << cfg.model.name;
  e << YAML::Key << "channels" << YAML::Value << YAML::Flow << cfg.model.channels;
  e << YAML::Key << "in_channels" << YAML::Value << cfg.model.in_channels;
  e << YAML::Key << "out_channels" << YAML::Value << cfg.model.out_channels;
  e << YAML::Key << "basis_size" << YAML::Value << cfg.model.basis_size;
  e << YAML::Key << "grid_extent" << YAML::Value << cfg.model.grid_extent;
  e << YAML::Key << "norm" << YAML::Value << to_string(cfg.model.norm);
  e << YAML::EndMap;
  e << YAML::Key << "split" << YAML::Value << cfg.split.string();
  e << YAML::Key << "epochs" << YAML::Value << cfg.epochs;
  e << YAML::Key << "batch_size" << YAML::Value << cfg.batch_size;
  e << YAML::Key << "lr" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "stages" << YAML::Value << YAML::Flow << cfg.lr.rates;
  e << YAML::Key << "starts" << YAML::Value << YAML::Flow << cfg.lr.starts;
  e << YAML::EndMap;
  e << YAML::Key << "augment" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "enabled" << YAML::Value << cfg.augment.enabled;
  e << YAML::Key << "noise_sigma" << YAML::Value << cfg.augment.noise_sigma;
  e << YAML::Key << "hflip" << YAML::Value << cfg.augment.hflip;
  e << YAML::Key << "vflip" << YAML::Value << cfg.augment.vflip;
  e << YAML::Key << "rot90" << YAML::Value << cfg.augment.rot90;
  e << YAML::Key << "transpose" << YAML::Value << cfg.augment.transpose;
  e << YAML::EndMap;
  e << YAML::Key << "loss" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "pixel_mean" << YAML::Value << cfg.pixel_mean_loss;
  e << YAML::EndMap;
  e << YAML::Key << "seed" << YAML::Value << cfg.seed;
  e << YAML::Key << "checkpoint_every" << YAML::Value << cfg.checkpoint_every;
  e << YAML::Key << "val_every" << YAML::Value << cfg.val_every;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

std::vector<Image> predict(Model<float>& model, const std::vector<Image>& inputs, int batch_size) {
  NoGradGuard guard;
  FlushDenormals ftz;
  std::vector<Image> out;
  for (std::size_t b = 0; b < inputs.size(); b += std::size_t(batch_size)) {
    const std::size_t e = std::min(inputs.size(), b + std::size_t(batch_size));
    std::vector<Image> chunk(inputs.begin() + long(b), inputs.begin() + long(e));
    Tensor<float> y = model.forward(to_tensor<float>(chunk), Mode::eval);
    for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back(to_image(y, Index(i)));
  }
  return out;
}

double evaluate_loss(Model<float>& model, const std::vector<Sample>& samples, Task task, bool pixel_mean,
                     int batch_size) {
  if (samples.empty()) throw DataError("evaluate_loss: no samples");
  NoGradGuard guard;
  FlushDenormals ftz;
  double total = 0;
  int batches = 0;
  for (std::size_t b = 0; b < samples.size(); b += std::size_t(batch_size), ++batches) {
    const std::size_t e = std::min(samples.size(), b + std::size_t(batch_size));
    total += double(batch_loss(model, samples, b, e, task, pixel_mean, Mode::eval).item());
  }
  return total / batches;
}

TrainResult train(TrainConfig cfg, const Dataset& data, const std::filesystem::path& out, std::ostream* progress,
                  const EpochHook& on_epoch) {
  cfg.resolve();
  if (data.train.empty()) throw DataError("train: empty training split");
  FlushDenormals ftz;
  std::filesystem::create_directories(out);

  auto model = build<float>(cfg.model, cfg.seed);
  auto params = model->parameters();
  Adam<float> adam(params);
  // data order and augmentation draw from their own stream
  std::mt19937_64 rng(cfg.seed ^ 0x5deece66dULL);

  std::ofstream metrics(out / "metrics.csv");
  metrics << "epoch,stage_lr,train_loss,val_metric\n";
  std::ofstream steps(out / "steps.csv");
  steps << "step,epoch,lr,loss\n";

  TrainResult result;
  std::vector<std::size_t> order(data.train.size());
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr.at(epoch);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += std::size_t(cfg.batch_size), ++batches) {
      const std::size_t e = std::min(order.size(), b + std::size_t(cfg.batch_size));
      std::vector<Sample> batch;
      for (std::size_t i = b; i < e; ++i) batch.push_back(augment(data.train[order[i]], cfg.task, cfg.augment, rng));
      params.zero_grad();
      Tensor<float> loss = batch_loss(*model, batch, 0, batch.size(), cfg.task, cfg.pixel_mean_loss, Mode::train);
      require_finite(loss, "training loss");
      backward(loss);
      adam.step(lr);
      const double value = double(loss.item());
      result.step_losses.push_back(value);
      epoch_loss += value;
      steps << ++step << ',' << epoch << ',' << full_precision(lr) << ',' << full_precision(value) << '\n';
    }
    params.zero_grad();

    EpochLog log{epoch, lr, epoch_loss / batches, std::nullopt};
    const bool last = epoch + 1 == cfg.epochs;
    if (!data.val.empty() && ((epoch + 1) % cfg.val_every == 0 || last)) {
      log.val_metric = evaluate_loss(*model, data.val, cfg.task, cfg.pixel_mean_loss, cfg.batch_size);
      if (result.best_epoch < 0 || *log.val_metric < result.best_val) {
        result.best_epoch = epoch;
        result.best_val = *log.val_metric;
        write_checkpoint(out / "best", snapshot(*model, cfg.seed));
      }
    }
    metrics << epoch << ',' << full_precision(lr) << ',' << full_precision(log.train_loss) << ','
            << (log.val_metric ? full_precision(*log.val_metric) : std::string()) << '\n';
    metrics.flush();
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0)
      write_checkpoint(out / ("epoch_" + std::to_string(epoch + 1)), snapshot(*model, cfg.seed));
    if (progress)
      *progress << "epoch " << epoch + 1 << "/" << cfg.epochs << " lr " << lr << " train " << log.train_loss
                << (log.val_metric ? " val " + std::to_string(*log.val_metric) : std::string()) << std::endl;
    result.epochs.push_back(log);
    if (on_epoch && !on_epoch(log, *model)) break;
  }
  write_checkpoint(out / "last", snapshot(*model, cfg.seed));
  if (result.best_epoch < 0) {
    // no validation split: the last state is the best we know
    write_checkpoint(out / "best", snapshot(*model, cfg.seed));
    result.best_epoch = result.epochs.back().epoch;
  }
  if (!metrics || !steps) throw DataError("train: failed writing logs under '" + out.string() + "'");
  return result;
}

}  // namespace funkan
