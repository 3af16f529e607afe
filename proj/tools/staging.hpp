#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace funkan::cli {

/// Output directory written under a sibling temp name and renamed into place
/// by commit(). Without commit the temp tree is removed, so an interrupted
/// or failed run leaves the target untouched.
class StagedDir {
 public:
  StagedDir(std::filesystem::path target, bool force);
  ~StagedDir();
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;

  const std::filesystem::path& path() const { return temp_; }
  const std::filesystem::path& target() const { return target_; }
  void commit();

 private:
  std::filesystem::path target_, temp_;
  bool committed_ = false;
};

/// Same contract for a single output file.
class StagedFile {
 public:
  StagedFile(std::filesystem::path target, bool force);
  ~StagedFile();
  StagedFile(const StagedFile&) = delete;
  StagedFile& operator=(const StagedFile&) = delete;

  const std::filesystem::path& path() const { return temp_; }
  void commit();

 private:
  std::filesystem::path target_, temp_;
  bool committed_ = false;
};

/// Common manifest fields: command, argv, seed, library versions.
nlohmann::json manifest(const std::string& command, const std::vector<std::string>& argv);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace funkan::cli
