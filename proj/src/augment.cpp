#include "funkan/augment.hpp"

#include <algorithm>

namespace funkan {

Task parse_task(const std::string& s) {
  if (s == "enhance") return Task::enhance;
  if (s == "segment") return Task::segment;
  throw ConfigError("unknown task '" + s + "' (enhance, segment)");
}

const char* to_string(Task task) { return task == Task::enhance ? "enhance" : "segment"; }

void AugmentConfig::validate() const {
  if (!(noise_sigma >= 0)) throw ConfigError("augment: noise sigma must be non-negative");
  for (double p : {hflip, vflip, rot90, transpose})
    if (!(p >= 0 && p <= 1)) throw ConfigError("augment: probabilities must lie in [0, 1]");
}

Image flip_horizontal(const Image& img) { return img.rowwise().reverse(); }
Image flip_vertical(const Image& img) { return img.colwise().reverse(); }
Image transposed(const Image& img) { return img.transpose(); }
Image rotate90(const Image& img) { return flip_horizontal(transposed(img)); }

Sample augment(Sample s, Task task, const AugmentConfig& cfg, std::mt19937_64& rng) {
  if (!cfg.enabled) return s;
  if (task == Task::enhance) {
    if (cfg.noise_sigma > 0) {
      std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
      for (Index i = 0; i < s.input.size(); ++i) s.input.data()[i] += noise(rng);
    }
  } else {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool h = u(rng) < cfg.hflip, v = u(rng) < cfg.vflip, r = u(rng) < cfg.rot90, t = u(rng) < cfg.transpose;
    const bool square = s.input.rows() == s.input.cols();
    auto apply = [&](Image (*f)(const Image&)) {
      s.input = f(s.input);
      s.target = f(s.target);
    };
    if (h) apply(flip_horizontal);
    if (v) apply(flip_vertical);
    if (r && square) apply(rotate90);
    if (t && square) apply(transposed);
  }
  s.input = s.input.cwiseMax(0.0).cwiseMin(1.0);
  return s;
}

}  // namespace funkan
