#include "staging.hpp"

#include <png.h>
#include <unistd.h>

#include <Eigen/Core>
#include <fstream>

#include "funkan/checkpoint.hpp"
#include "funkan/errors.hpp"

namespace funkan::cli {

namespace fs = std::filesystem;

namespace {

fs::path sibling(const fs::path& target, const char* tag) {
  fs::path clean = target;
  if (!clean.has_filename()) clean = clean.parent_path();
  return clean.parent_path() / ("." + clean.filename().string() + tag + std::to_string(::getpid()));
}

void refuse_existing(const fs::path& target, bool force) {
  if (fs::exists(target) && !force)
    throw ConfigError("output '" + target.string() + "' already exists (pass --force to overwrite)");
}

// Swap `temp` into `target`, moving any previous content aside first so the
// target is never observed half-written.
void swap_in(const fs::path& temp, const fs::path& target) {
  const fs::path old = sibling(target, ".old-");
  const bool had = fs::exists(target);
  if (had) fs::rename(target, old);
  try {
    fs::rename(temp, target);
  } catch (...) {
    if (had) fs::rename(old, target);
    throw;
  }
  if (had) fs::remove_all(old);
}

fs::path strip_slash(fs::path p) { return p.has_filename() ? p : p.parent_path(); }

}  // namespace

StagedDir::StagedDir(fs::path target, bool force) : target_(strip_slash(std::move(target))) {
  refuse_existing(target_, force);
  if (!target_.parent_path().empty()) fs::create_directories(target_.parent_path());
  temp_ = sibling(target_, ".tmp-");
  fs::remove_all(temp_);
  fs::create_directories(temp_);
}

StagedDir::~StagedDir() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(temp_, ec);
  }
}

void StagedDir::commit() {
  swap_in(temp_, target_);
  committed_ = true;
}

StagedFile::StagedFile(fs::path target, bool force) : target_(std::move(target)) {
  refuse_existing(target_, force);
  if (!target_.parent_path().empty()) fs::create_directories(target_.parent_path());
  temp_ = sibling(target_, ".tmp-");
}

StagedFile::~StagedFile() {
  if (!committed_) {
    std::error_code ec;
    fs::remove(temp_, ec);
  }
}

void StagedFile::commit() {
  swap_in(temp_, target_);
  committed_ = true;
}

nlohmann::json manifest(const std::string& command, const std::vector<std::string>& argv) {
  nlohmann::json j;
  j["command"] = command;
  j["argv"] = argv;
  j["versions"] = {
      {"funkan", "0.1.0"},
      {"checkpoint_format", kCheckpointFormat},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"libpng", PNG_LIBPNG_VER_STRING},
      {"compiler", __VERSION__},
  };
  return j;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

}  // namespace funkan::cli
