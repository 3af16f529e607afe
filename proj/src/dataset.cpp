#include "funkan/dataset.hpp"

#include <fstream>
#include <sstream>

#include "funkan/image_io.hpp"

namespace funkan {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Image load_plane(const std::filesystem::path& stem, const char* which) {
  const std::filesystem::path png = stem.string() + "_" + which + ".png";
  const std::filesystem::path raw = stem.string() + "_" + which + ".f32";
  if (!std::filesystem::exists(png)) throw DataError("missing sample file '" + png.string() + "'");
  if (std::filesystem::exists(raw)) {
    const auto [h, w] = png_size(png);
    return read_raw_f32(raw, h, w);
  }
  return read_png(png);
}

}  // namespace

std::vector<SplitEntry> read_split(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw DataError("cannot open split file '" + csv.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("split file '" + csv.string() + "' is empty");
  const auto header = split_line(line);
  int path_col = -1, role_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "path") path_col = int(i);
    if (header[i] == "role") role_col = int(i);
  }
  if (path_col < 0 || role_col < 0)
    throw DataError("split file '" + csv.string() + "' needs a header with 'path' and 'role' columns");
  std::vector<SplitEntry> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (int(cells.size()) <= std::max(path_col, role_col))
      throw DataError(csv.string() + ":" + std::to_string(lineno) + ": too few columns");
    const std::string& role = cells[role_col];
    if (role != "train" && role != "val" && role != "test")
      throw DataError(csv.string() + ":" + std::to_string(lineno) + ": unknown role '" + role + "'");
    std::filesystem::path p = cells[path_col];
    if (p.is_relative()) p = csv.parent_path() / p;
    out.push_back({p, role});
  }
  return out;
}

Sample load_sample(const std::filesystem::path& stem) {
  Sample s{stem.filename().string(), load_plane(stem, "input"), load_plane(stem, "target")};
  if (s.input.rows() != s.target.rows() || s.input.cols() != s.target.cols())
    throw DataError("sample '" + stem.string() + "': input and target sizes differ");
  return s;
}

void save_sample(const std::filesystem::path& stem, const Image& input, const Image& target) {
  write_png16(stem.string() + "_input.png", input);
  write_raw_f32(stem.string() + "_input.f32", input);
  write_png16(stem.string() + "_target.png", target);
  write_raw_f32(stem.string() + "_target.f32", target);
}

Dataset load_dataset(const std::filesystem::path& csv) {
  Dataset d;
  for (const auto& e : read_split(csv)) {
    Sample s = load_sample(e.path);
    (e.role == "train" ? d.train : e.role == "val" ? d.val : d.test).push_back(std::move(s));
  }
  if (d.train.empty()) throw DataError("split file '" + csv.string() + "' lists no training samples");
  return d;
}

}  // namespace funkan
