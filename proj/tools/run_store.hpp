#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dni::cli {

std::string sha256_file(const std::filesystem::path& path);

// Every regular file below `dir`, sorted.
std::vector<std::filesystem::path> files_under(const std::filesystem::path& dir);

// run.json of one run directory: the global seed, the resolved config and one
// entry per stage with its seeds, parameters and artifact digests.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  bool exists() const { return !doc_.is_null(); }
  const nlohmann::json& doc() const { return doc_; }

  // Pins seed and config on first use; later invocations must agree.
  void bind(std::uint64_t seed, const nlohmann::json& config);

  // Replaces the stage entry. Artifact paths are stored relative to the run
  // directory. Artifacts previously owned by this stage that are no longer
  // listed are deleted.
  void record(const std::string& stage, const nlohmann::json& params, const nlohmann::json& seeds,
              const std::vector<std::filesystem::path>& artifacts);
  void save() const;

 private:
  std::filesystem::path dir_;
  nlohmann::json doc_;
};

}  // namespace dni::cli
