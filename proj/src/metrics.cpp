#include "funkan/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace funkan {

namespace {

void require_same(const Image& a, const Image& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(what) + ": image sizes differ (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                     ")");
}

struct Counts {
  double inter = 0, p = 0, g = 0;
};

Counts count(const Image& p, const Image& g) {
  Counts c;
  for (Index i = 0; i < p.size(); ++i) {
    const bool a = p.data()[i] != 0, b = g.data()[i] != 0;
    c.inter += a && b;
    c.p += a;
    c.g += b;
  }
  return c;
}

Image threshold_logits(const Image& logits, double threshold) {
  return logits.unaryExpr([threshold](double z) { return 1.0 / (1.0 + std::exp(-z)) > threshold ? 1.0 : 0.0; });
}

Image binarize(const Image& mask) {
  return mask.unaryExpr([](double v) { return v > 0.5 ? 1.0 : 0.0; });
}

}  // namespace

double psnr(const Image& pred, const Image& target, double peak) {
  require_same(pred, target, "psnr");
  if (!(peak > 0)) throw ConfigError("psnr: peak must be positive");
  const double mse =
      (pred.cwiseMax(0.0).cwiseMin(peak) - target.cwiseMax(0.0).cwiseMin(peak)).square().mean();
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double total_variation(const Image& img) {
  const Index h = img.rows(), w = img.cols();
  if (h < 2 || w < 2) throw ShapeError("total_variation: need at least 2x2");
  double tv = 0;
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < w; ++j) {
      const double dx = (j + 1 < w ? img(i, j + 1) : img(i, j)) - img(i, j);
      const double dy = (i + 1 < h ? img(i + 1, j) : img(i, j)) - img(i, j);
      tv += std::sqrt(dx * dx + dy * dy);
    }
  return tv;
}

double iou_binary(const Image& p, const Image& g) {
  require_same(p, g, "iou");
  const Counts c = count(p, g);
  const double uni = c.p + c.g - c.inter;
  return uni == 0 ? 1.0 : c.inter / uni;
}

double f1_binary(const Image& p, const Image& g) {
  require_same(p, g, "f1");
  const Counts c = count(p, g);
  return c.p + c.g == 0 ? 1.0 : 2 * c.inter / (c.p + c.g);
}

double iou(const Image& logits, const Image& mask, double threshold) {
  require_same(logits, mask, "iou");
  return iou_binary(threshold_logits(logits, threshold), binarize(mask));
}

double f1(const Image& logits, const Image& mask, double threshold) {
  require_same(logits, mask, "f1");
  return f1_binary(threshold_logits(logits, threshold), binarize(mask));
}

MetricReport MetricReport::from(std::string name, std::vector<double> values) {
  MetricReport r;
  r.name = std::move(name);
  r.values = std::move(values);
  if (r.values.empty()) return r;
  double s = 0;
  for (double v : r.values) s += v;
  r.mean = s / double(r.values.size());
  // all-equal lists (including repeated +inf sentinels) have zero spread
  if (std::all_of(r.values.begin(), r.values.end(), [&](double v) { return v == r.values.front(); })) return r;
  if (r.values.size() > 1) {
    double ss = 0;
    for (double v : r.values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / double(r.values.size() - 1));
  }
  return r;
}

}  // namespace funkan
