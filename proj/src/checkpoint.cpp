#include "funkan/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace funkan {

using nlohmann::json;

namespace {

json spec_json(const ModelSpec& s) {
  return {{"name", s.name},
          {"channels", s.channels},
          {"in_channels", s.in_channels},
          {"out_channels", s.out_channels},
          {"basis_size", s.basis_size},
          {"grid_extent", s.grid_extent},
          {"norm", to_string(s.norm)},
          {"identity_backbone", s.identity_backbone}};
}

ModelSpec spec_from(const json& j) {
  try {
    ModelSpec s;
    s.name = j.at("name").get<std::string>();
    s.channels = j.value("channels", std::vector<Index>{});
    s.in_channels = j.value("in_channels", Index(1));
    s.out_channels = j.value("out_channels", Index(1));
    s.basis_size = j.value("basis_size", 6);
    s.grid_extent = j.value("grid_extent", 3.0);
    s.norm = parse_attention_norm(j.value("norm", std::string("softmax")));
    s.identity_backbone = j.value("identity_backbone", false);
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model spec: ") + e.what());
  }
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

std::string spec_to_json(const ModelSpec& spec) { return spec_json(spec).dump(); }

ModelSpec spec_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("model spec: invalid JSON");
  return spec_from(j);
}

void write_checkpoint(const std::filesystem::path& stem, const Checkpoint& ckpt) {
  std::vector<float> blob;
  json params = json::array(), buffers = json::array();
  for (const auto& p : ckpt.parameters) {
    params.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", blob.size() * sizeof(float)},
                      {"count", p.values.size()}});
    blob.insert(blob.end(), p.values.begin(), p.values.end());
  }
  for (const auto& b : ckpt.buffers) {
    json entry = {{"name", b.name}, {"channels", b.mean.size()}, {"initialized", b.initialized},
                  {"mean_offset", blob.size() * sizeof(float)}};
    blob.insert(blob.end(), b.mean.begin(), b.mean.end());
    entry["var_offset"] = blob.size() * sizeof(float);
    blob.insert(blob.end(), b.var.begin(), b.var.end());
    buffers.push_back(entry);
  }
  json manifest = {{"format", kCheckpointFormat},
                   {"spec", spec_json(ckpt.spec)},
                   {"seed", ckpt.seed},
                   {"dtype", "float32-le"},
                   {"blob", with_suffix(stem, ".bin").filename().string()},
                   {"blob_bytes", blob.size() * sizeof(float)},
                   {"parameters", params},
                   {"buffers", buffers}};
  {
    std::ofstream out(with_suffix(stem, ".bin"), std::ios::binary);
    out.write(reinterpret_cast<const char*>(blob.data()), std::streamsize(blob.size() * sizeof(float)));
    if (!out) throw DataError("cannot write checkpoint blob for '" + stem.string() + "'");
  }
  std::ofstream out(with_suffix(stem, ".json"));
  out << manifest.dump(2) << '\n';
  if (!out) throw DataError("cannot write checkpoint manifest for '" + stem.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& stem) {
  std::ifstream in(with_suffix(stem, ".json"));
  if (!in) throw DataError("cannot open checkpoint manifest '" + with_suffix(stem, ".json").string() + "'");
  json m = json::parse(in, nullptr, false);
  if (m.is_discarded() || !m.is_object()) throw DataError("checkpoint manifest is not valid JSON");
  if (m.value("format", std::string()) != kCheckpointFormat)
    throw DataError("checkpoint manifest has an unknown format tag");

  const auto blob_path = stem.parent_path() / m.value("blob", with_suffix(stem, ".bin").filename().string());
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw DataError("cannot open checkpoint blob '" + blob_path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  auto slice = [&](std::size_t offset, std::size_t count, const std::string& what) {
    if (offset % sizeof(float) != 0 || offset + count * sizeof(float) > bytes.size())
      throw DataError("checkpoint: " + what + " lies outside the blob");
    std::vector<float> v(count);
    std::memcpy(v.data(), bytes.data() + offset, count * sizeof(float));
    return v;
  };

  Checkpoint ckpt;
  try {
    ckpt.spec = spec_from(m.at("spec"));
    ckpt.seed = m.at("seed").get<std::uint64_t>();
    for (const auto& p : m.at("parameters")) {
      TensorRecord r;
      r.name = p.at("name").get<std::string>();
      r.shape = p.at("shape").get<Shape>();
      const auto count = p.at("count").get<std::size_t>();
      if (count != std::size_t(numel(r.shape))) throw DataError("checkpoint: " + r.name + " count/shape mismatch");
      r.values = slice(p.at("offset").get<std::size_t>(), count, r.name);
      ckpt.parameters.push_back(std::move(r));
    }
    for (const auto& b : m.at("buffers")) {
      StatsRecord r;
      r.name = b.at("name").get<std::string>();
      r.initialized = b.at("initialized").get<bool>();
      const auto c = b.at("channels").get<std::size_t>();
      r.mean = slice(b.at("mean_offset").get<std::size_t>(), c, r.name);
      r.var = slice(b.at("var_offset").get<std::size_t>(), c, r.name);
      ckpt.buffers.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  }
  return ckpt;
}

}  // namespace funkan
