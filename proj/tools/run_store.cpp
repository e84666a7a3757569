#include "run_store.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>
#include <stdexcept>

#include <openssl/evp.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace dni::cli {

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 init failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::vector<fs::path> files_under(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

RunStore::RunStore(fs::path dir) : dir_(std::move(dir)) {
  std::ifstream in(dir_ / "run.json");
  if (in) doc_ = json::parse(in);
}

void RunStore::bind(std::uint64_t seed, const json& config) {
  if (exists()) {
    if (doc_.at("seed").get<std::uint64_t>() != seed || doc_.at("config") != config)
      throw std::runtime_error(dir_.string() + " belongs to a run with a different seed or config");
    return;
  }
  doc_ = json{{"seed", seed}, {"config", config}, {"stages", json::object()}};
}

void RunStore::record(const std::string& stage, const json& params, const json& seeds,
                      const std::vector<fs::path>& artifacts) {
  json digests = json::object();
  for (const auto& a : artifacts) digests[fs::relative(a, dir_).generic_string()] = sha256_file(a);

  auto& stages = doc_["stages"];
  if (stages.contains(stage)) {
    for (const auto& [rel, _] : stages[stage].at("artifacts").items())
      if (!digests.contains(rel)) fs::remove(dir_ / rel);
  }
  stages[stage] = json{{"params", params}, {"seeds", seeds}, {"artifacts", digests}};
}

void RunStore::save() const {
  fs::create_directories(dir_);
  const auto tmp = dir_ / "run.json.tmp";
  {
    std::ofstream out(tmp);
    out << doc_.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, dir_ / "run.json");
}

}  // namespace dni::cli
