#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "funkan/checkpoint.hpp"
#include "funkan/dataset.hpp"
#include "funkan/errors.hpp"
#include "funkan/hermite.hpp"
#include "funkan/image_io.hpp"
#include "funkan/metrics.hpp"
#include "funkan/models.hpp"
#include "funkan/phantom.hpp"
#include "funkan/train.hpp"
#include "staging.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace funkan;

namespace {

std::vector<std::string> g_argv;

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Checkpoints are named by stem; accept "x", "x.json" or "x.bin".
fs::path checkpoint_stem(fs::path p) {
  if (p.extension() == ".json" || p.extension() == ".bin") p.replace_extension();
  return p;
}

// PNG gives the size; a sibling .f32 carries the exact values when present.
Image load_image(const fs::path& png) {
  fs::path raw = png;
  raw.replace_extension(".f32");
  if (fs::exists(raw)) {
    auto [h, w] = png_size(png);
    return read_raw_f32(raw, h, w);
  }
  return read_png(png);
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no PNG images in '" + dir.string() + "'");
  return out;
}

bool ends_with(const std::string& s, const std::string& tail) {
  return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string task = "enhance";
  int count = 0, val = 0, test = 0;
  Index size = 0, canvas = 0;
  std::uint64_t seed = 0;
  fs::path out;
  bool force = false;
  int min_ellipses = 1, max_ellipses = 3, min_rectangles = 0, max_rectangles = 2;
};

int run_synth(const SynthArgs& a) {
  const Task task = parse_task(a.task);
  if (a.count < 1) throw ConfigError("synth: --count must be positive");
  if (a.val < 0 || a.test < 0 || a.val + a.test > a.count)
    throw ConfigError("synth: --val plus --test must not exceed --count");

  PhantomSpec spec;
  spec.min_ellipses = a.min_ellipses;
  spec.max_ellipses = a.max_ellipses;
  spec.min_rectangles = a.min_rectangles;
  spec.max_rectangles = a.max_rectangles;
  if (task == Task::enhance) {
    spec.crop = a.size > 0 ? a.size : 145;
    spec.canvas = a.canvas > 0 ? a.canvas : Index(std::lround(double(spec.crop) * 255.0 / 145.0));
  } else {
    spec.canvas = spec.crop = a.size > 0 ? a.size : 64;
  }

  cli::StagedDir dir(a.out, a.force);
  std::ofstream index(dir.path() / "index.csv");
  index << "path,seed,role\n";
  std::mt19937_64 seeds(a.seed);
  const int n_train = a.count - a.val - a.test;
  for (int i = 0; i < a.count; ++i) {
    spec.seed = seeds();
    const SamplePair pair = task == Task::enhance ? make_pair(spec) : make_mask_pair(spec);
    char stem[32];
    std::snprintf(stem, sizeof stem, "sample_%05d", i);
    save_sample(dir.path() / stem, pair.input, pair.target);
    const char* role = i < n_train ? "train" : i < n_train + a.val ? "val" : "test";
    index << stem << ',' << pair.seed << ',' << role << '\n';
  }
  index.close();
  if (!index) throw DataError("synth: failed writing index.csv");

  json m = cli::manifest("synth", g_argv);
  m["seed"] = a.seed;
  m["config"] = {{"task", to_string(task)},
                 {"count", a.count},
                 {"val", a.val},
                 {"test", a.test},
                 {"canvas", spec.canvas},
                 {"size", spec.crop},
                 {"ellipses", {spec.min_ellipses, spec.max_ellipses}},
                 {"rectangles", {spec.min_rectangles, spec.max_rectangles}},
                 {"intensity", {spec.intensity_lo, spec.intensity_hi}}};
  cli::write_json(dir.path() / "manifest.json", m);
  dir.commit();
  std::cout << "wrote " << a.count << " pairs to " << dir.target().string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  fs::path config, out, split;
  std::uint64_t seed = 0;
  int epochs = 0, batch_size = 0;
  bool force = false, quiet = false;
};

int run_train(const TrainArgs& a) {
  TrainConfig defaults;
  defaults.seed = a.seed;
  if (a.epochs > 0) defaults.epochs = a.epochs;
  if (a.batch_size > 0) defaults.batch_size = a.batch_size;
  if (!a.split.empty()) defaults.split = fs::absolute(a.split);
  TrainConfig cfg = load_train_config(a.config, defaults);
  cfg.resolve();
  const Dataset data = load_dataset(cfg.split);

  cli::StagedDir dir(a.out, a.force);
  const TrainResult result = train(cfg, data, dir.path(), a.quiet ? nullptr : &std::cerr);
  {
    std::ofstream y(dir.path() / "config.yaml");
    y << to_yaml(cfg);
  }
  json m = cli::manifest("train", g_argv);
  m["seed"] = cfg.seed;
  m["config_yaml"] = to_yaml(cfg);
  m["samples"] = {{"train", data.train.size()}, {"val", data.val.size()}, {"test", data.test.size()}};
  m["best_epoch"] = result.best_epoch;
  cli::write_json(dir.path() / "manifest.json", m);
  dir.commit();
  std::cout << "trained " << result.epochs.size() << " epochs into " << dir.target().string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  fs::path pred, target, out;
  std::string metrics = "psnr,tv";
  bool logits = false, force = false;
};

int run_eval(const EvalArgs& a) {
  std::vector<std::string> names;
  {
    std::stringstream ss(a.metrics);
    for (std::string t; std::getline(ss, t, ',');) {
      if (t != "psnr" && t != "tv" && t != "iou" && t != "f1") throw ConfigError("eval: unknown metric '" + t + "'");
      names.push_back(t);
    }
  }
  if (names.empty()) throw ConfigError("eval: no metrics requested");

  std::vector<std::string> ids;
  std::map<std::string, std::vector<double>> columns;
  for (const auto& png : list_pngs(a.pred)) {
    const std::string id = png.stem().string();
    fs::path tgt = a.target / (id + ".png");
    if (!fs::exists(tgt) && ends_with(id, "_input")) tgt = a.target / (id.substr(0, id.size() - 6) + "_target.png");
    if (!fs::exists(tgt)) tgt = a.target / (id + "_target.png");
    if (!fs::exists(tgt)) throw DataError("eval: no target for '" + id + "' in '" + a.target.string() + "'");
    const Image p = load_image(png), t = load_image(tgt);
    if (p.rows() != t.rows() || p.cols() != t.cols()) throw DataError("eval: size mismatch for '" + id + "'");
    // iou/f1 threshold predictions at 0.5 as probabilities, or at 0 as logits.
    const Image logits = a.logits ? p : Image((p > 0.5).cast<double>() * 2.0 - 1.0);
    ids.push_back(id);
    for (const auto& n : names) {
      double v = 0;
      if (n == "psnr") v = psnr(p, t);
      else if (n == "tv") v = total_variation(p);
      else if (n == "iou") v = iou(logits, t);
      else v = f1(logits, t);
      columns[n].push_back(v);
    }
  }

  cli::StagedFile file(a.out, a.force);
  {
    std::ofstream csv(file.path());
    csv << "image";
    for (const auto& n : names) csv << ',' << n;
    csv << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i) {
      csv << ids[i];
      for (const auto& n : names) csv << ',' << num(columns[n][i]);
      csv << '\n';
    }
    csv << "mean±std";
    for (const auto& n : names) {
      const auto r = MetricReport::from(n, columns[n]);
      csv << ',' << num(r.mean) << "±" << num(r.std);
    }
    csv << '\n';
    if (!csv) throw DataError("eval: failed writing report");
  }
  json m = cli::manifest("eval", g_argv);
  m["config"] = {{"pred", a.pred.string()},
                 {"target", a.target.string()},
                 {"metrics", names},
                 {"pred_kind", a.logits ? "logits" : "probability"},
                 {"images", ids.size()}};
  fs::path mpath = a.out;
  mpath += ".manifest.json";
  cli::StagedFile mfile(mpath, true);
  cli::write_json(mfile.path(), m);
  file.commit();
  mfile.commit();
  std::cout << "evaluated " << ids.size() << " images into " << a.out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  fs::path ckpt, input, out;
  bool force = false;
};

int run_infer(const InferArgs& a) {
  const fs::path stem = checkpoint_stem(a.ckpt);
  auto model = load_model<float>(stem);
  const bool segment = model->spec().name == "ufunkan";
  const auto files = list_pngs(a.input);
  std::vector<fs::path> inputs;
  for (const auto& f : files)
    if (ends_with(f.stem().string(), "_input")) inputs.push_back(f);
  if (inputs.empty()) inputs = files;

  cli::StagedDir dir(a.out, a.force);
  for (const auto& f : inputs) {
    std::string id = f.stem().string();
    if (ends_with(id, "_input")) id.resize(id.size() - 6);
    Image y = predict(*model, {load_image(f)}, 1).front();
    if (segment) y = 1.0 / (1.0 + (-y).exp());
    write_png16(dir.path() / (id + ".png"), y);
    write_raw_f32(dir.path() / (id + ".f32"), y);
  }
  json m = cli::manifest("infer", g_argv);
  m["seed"] = read_checkpoint(stem).seed;
  m["config"] = {{"checkpoint", stem.string()},
                 {"spec", json::parse(spec_to_json(model->spec()))},
                 {"input", a.input.string()},
                 {"images", inputs.size()},
                 {"output", segment ? "probability" : "image"}};
  cli::write_json(dir.path() / "manifest.json", m);
  dir.commit();
  std::cout << "wrote " << inputs.size() << " predictions to " << dir.target().string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- inspect attention

struct InspectArgs {
  fs::path ckpt, out;
  int layer = 0;
  bool force = false;
};

int run_inspect(const InspectArgs& a) {
  const fs::path stem = checkpoint_stem(a.ckpt);
  auto model = load_model<double>(stem);
  auto blocks = model->backbone();
  if (blocks.empty()) throw ConfigError("inspect: model has an identity backbone");
  if (a.layer < 0 || a.layer >= int(blocks.size()))
    throw ConfigError("inspect: --layer must be in [0, " + std::to_string(blocks.size() - 1) + "]");
  const auto& block = *blocks[a.layer];
  const auto att = block.attention();

  cli::StagedDir dir(a.out, a.force);
  {
    std::ofstream csv(dir.path() / "attention.csv");
    csv << "channel";
    for (Index k = 0; k < att.cols(); ++k) csv << ",psi_" << k;
    csv << '\n';
    for (Index i = 0; i < att.rows(); ++i) {
      csv << i;
      for (Index k = 0; k < att.cols(); ++k) csv << ',' << num(att(i, k));
      csv << '\n';
    }
  }
  const Image img = att.cast<double>();
  write_heatmap_png(dir.path() / "attention.png", img, std::min(0.0, img.minCoeff()), img.maxCoeff());
  json m = cli::manifest("inspect attention", g_argv);
  m["seed"] = read_checkpoint(stem).seed;
  m["config"] = {{"checkpoint", stem.string()},
                 {"layer", block.label()},
                 {"norm", to_string(block.options().norm)},
                 {"shape", {att.rows(), att.cols()}}};
  cli::write_json(dir.path() / "manifest.json", m);
  dir.commit();
  std::cout << block.label() << ": " << att.rows() << "x" << att.cols() << " attention written to "
            << dir.target().string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- basis dump

struct BasisArgs {
  int r = 6;
  Index h = 64, w = 64;
  double extent = 3.0;
  fs::path out;
  bool force = false;
};

int run_basis(const BasisArgs& a) {
  const HermiteBasis<double> basis(a.r);
  auto [qx, qy] = uniform_grid<double>(a.h, a.w, a.extent);
  cli::StagedDir dir(a.out, a.force);
  for (int k = 0; k < a.r; ++k) {
    const auto t = eval_separable_2d(basis, k, qx, qy);
    Image img(a.h, a.w);
    for (Index i = 0; i < t.numel(); ++i) img(i / a.w, i % a.w) = t[i];
    const double m = std::max(img.abs().maxCoeff(), 1e-12);
    const std::string name = "psi_" + std::to_string(k);
    write_heatmap_png(dir.path() / (name + ".png"), img, -m, m);
    write_raw_f32(dir.path() / (name + ".f32"), img);
  }
  json m = cli::manifest("basis dump", g_argv);
  m["config"] = {{"r", a.r}, {"h", a.h}, {"w", a.w}, {"extent", a.extent}};
  cli::write_json(dir.path() / "manifest.json", m);
  dir.commit();
  std::cout << "wrote " << a.r << " basis maps to " << dir.target().string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- summary

struct SummaryArgs {
  fs::path ckpt, out;
  std::string model = "enhance", norm = "softmax";
  std::vector<Index> channels;
  int basis_size = 6;
  double extent = 3.0;
  Index batch = 1, h = 0, w = 0;
  bool force = false;
};

int run_summary(const SummaryArgs& a) {
  std::unique_ptr<Model<double>> model;
  if (!a.ckpt.empty()) {
    model = load_model<double>(checkpoint_stem(a.ckpt));
  } else {
    ModelSpec spec{.name = a.model};
    spec.channels = a.channels;
    spec.basis_size = a.basis_size;
    spec.grid_extent = a.extent;
    spec.norm = parse_attention_norm(a.norm);
    model = build<double>(spec, 0);
  }
  const bool segment = model->spec().name == "ufunkan";
  const Index h = a.h > 0 ? a.h : segment ? 256 : 145;
  const Index w = a.w > 0 ? a.w : h;
  const Shape input{a.batch, model->spec().in_channels, h, w};
  model->check_input(input);
  const auto rows = model->costs(input);

  std::ostringstream table;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-16s %-22s %12s %16s\n", "layer", "kind", "output", "params", "flops");
  table << line;
  Index params = 0;
  std::int64_t flops = 0;
  for (const auto& c : rows) {
    std::string shape;
    for (std::size_t i = 0; i < c.output.size(); ++i) shape += (i ? "x" : "") + std::to_string(c.output[i]);
    std::snprintf(line, sizeof line, "%-28s %-16s %-22s %12lld %16lld\n", c.name.c_str(), c.kind.c_str(),
                  shape.c_str(), static_cast<long long>(c.params), static_cast<long long>(c.flops));
    table << line;
    params += c.params;
    flops += c.flops;
  }
  std::snprintf(line, sizeof line, "%-28s %-16s %-22s %12lld %16lld\n", "total", "", "",
                static_cast<long long>(params), static_cast<long long>(flops));
  table << line;
  std::cout << table.str();
  if (params != count_params(*model)) throw NumericError("summary: layer table does not add up to the parameter count");

  if (!a.out.empty()) {
    cli::StagedDir dir(a.out, a.force);
    {
      std::ofstream csv(dir.path() / "summary.csv");
      csv << "layer,kind,output,params,flops\n";
      for (const auto& c : rows) {
        csv << c.name << ',' << c.kind << ',';
        for (std::size_t i = 0; i < c.output.size(); ++i) csv << (i ? "x" : "") << c.output[i];
        csv << ',' << c.params << ',' << c.flops << '\n';
      }
      csv << "total,,," << params << ',' << flops << '\n';
    }
    json m = cli::manifest("summary", g_argv);
    m["config"] = {{"spec", json::parse(spec_to_json(model->spec()))}, {"input", input}};
    cli::write_json(dir.path() / "manifest.json", m);
    dir.commit();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"FunKAN: functional KAN layers, Gibbs-ringing synthesis and desk-scale training"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate phantom image pairs with an index CSV");
  s->add_option("--task", synth.task, "enhance or segment")->check(CLI::IsMember({"enhance", "segment"}));
  s->add_option("--count", synth.count, "Number of pairs")->required();
  s->add_option("--size", synth.size, "Output image side (enhance default 145, segment default 64)");
  s->add_option("--canvas", synth.canvas, "Enhance only: high-resolution render side (default size*255/145)");
  s->add_option("--val", synth.val, "Pairs assigned the val role");
  s->add_option("--test", synth.test, "Pairs assigned the test role");
  s->add_option("--min-ellipses", synth.min_ellipses);
  s->add_option("--max-ellipses", synth.max_ellipses);
  s->add_option("--min-rectangles", synth.min_rectangles);
  s->add_option("--max-rectangles", synth.max_rectangles);
  s->add_option("--seed", synth.seed)->required();
  s->add_option("--out", synth.out)->required();
  s->add_flag("--force", synth.force, "Replace an existing output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model from a YAML config");
  t->add_option("--config", tr.config)->required()->check(CLI::ExistingFile);
  t->add_option("--seed", tr.seed, "Run seed (a seed key in the config takes precedence)")->required();
  t->add_option("--out", tr.out)->required();
  t->add_option("--split", tr.split, "Split CSV when the config has none");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch_size);
  t->add_flag("--quiet", tr.quiet);
  t->add_flag("--force", tr.force);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predictions against targets");
  e->add_option("--pred", ev.pred)->required();
  e->add_option("--target", ev.target)->required();
  e->add_option("--metrics", ev.metrics, "Comma list of psnr,tv,iou,f1");
  e->add_option("--out", ev.out)->required();
  e->add_flag("--logits", ev.logits, "Predictions are logits (threshold 0) instead of probabilities");
  e->add_flag("--force", ev.force);

  InferArgs inf;
  auto* i = app.add_subcommand("infer", "Run a checkpoint over a directory of images");
  i->add_option("--ckpt", inf.ckpt)->required();
  i->add_option("--input", inf.input)->required();
  i->add_option("--out", inf.out)->required();
  i->add_flag("--force", inf.force);

  InspectArgs ins;
  auto* insp = app.add_subcommand("inspect", "Inspect a trained model");
  insp->require_subcommand(1);
  auto* att = insp->add_subcommand("attention", "Dump one block's normalized attention matrix");
  att->add_option("--ckpt", ins.ckpt)->required();
  att->add_option("--layer", ins.layer, "Backbone block index");
  att->add_option("--out", ins.out)->required();
  att->add_flag("--force", ins.force);

  BasisArgs bas;
  auto* b = app.add_subcommand("basis", "Hermite basis utilities");
  b->require_subcommand(1);
  auto* dump = b->add_subcommand("dump", "Write each 2-D basis map as PNG and raw float");
  dump->set_help_flag("--help", "Print this help message and exit");  // frees --h
  dump->add_option("--r", bas.r);
  dump->add_option("--h", bas.h);
  dump->add_option("--w", bas.w);
  dump->add_option("--extent", bas.extent);
  dump->add_option("--out", bas.out)->required();
  dump->add_flag("--force", bas.force);

  SummaryArgs sum;
  auto* su = app.add_subcommand("summary", "Per-layer parameter and FLOP table");
  su->set_help_flag("--help", "Print this help message and exit");
  su->add_option("--model", sum.model)->check(CLI::IsMember({"enhance", "ufunkan"}));
  su->add_option("--ckpt", sum.ckpt);
  su->add_option("--channels", sum.channels)->delimiter(',');
  su->add_option("--basis-size", sum.basis_size);
  su->add_option("--extent", sum.extent);
  su->add_option("--norm", sum.norm);
  su->add_option("--batch", sum.batch);
  su->add_option("--h", sum.h);
  su->add_option("--w", sum.w);
  su->add_option("--out", sum.out, "Also write summary.csv and a manifest here");
  su->add_flag("--force", sum.force);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "error: " << ex.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*s) return run_synth(synth);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*i) return run_infer(inf);
    if (*att) return run_inspect(ins);
    if (*dump) return run_basis(bas);
    if (*su) return run_summary(sum);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return exit_code_for(ex);
  }
  return 1;
}
