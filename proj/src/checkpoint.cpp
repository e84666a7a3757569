#include "dni/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dni {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path checkpoint_bin(const fs::path& stem) { return fs::path(stem.string() + ".bin"); }
fs::path checkpoint_json(const fs::path& stem) { return fs::path(stem.string() + ".json"); }

namespace {

void put_f32le(std::ostream& os, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                              static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

float get_f32le(const unsigned char* b) {
  const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                             (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(bits);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint manifest " + path.string());
  return json::parse(in);
}

}  // namespace

template <typename T>
void save_checkpoint(const fs::path& stem, const ParameterSet<T>& params, const json& architecture) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  std::ofstream bin(checkpoint_bin(stem), std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write checkpoint " + checkpoint_bin(stem).string());
  json manifest;
  manifest["format"] = "f32le";
  manifest["architecture"] = architecture;
  manifest["parameters"] = json::array();
  std::size_t offset = 0;
  for (const auto* p : params.all()) {
    for (const auto v : p->value.data()) put_f32le(bin, static_cast<float>(v));
    manifest["parameters"].push_back(
        {{"name", p->name}, {"shape", p->value.shape()}, {"offset", offset}, {"count", p->value.size()}});
    offset += p->value.size();
  }
  manifest["total"] = offset;
  std::ofstream js(checkpoint_json(stem));
  if (!js) throw std::runtime_error("cannot write checkpoint " + checkpoint_json(stem).string());
  js << manifest.dump(2) << '\n';
}

json read_checkpoint_manifest(const fs::path& stem) { return read_json(checkpoint_json(stem)).at("architecture"); }

template <typename T>
void load_checkpoint(const fs::path& stem, ParameterSet<T>& params) {
  const json manifest = read_json(checkpoint_json(stem));
  if (manifest.at("format") != "f32le") throw std::runtime_error("unsupported checkpoint format");
  std::ifstream bin(checkpoint_bin(stem), std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open checkpoint " + checkpoint_bin(stem).string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  const std::size_t total = manifest.at("total").get<std::size_t>();
  if (bytes.size() != total * 4)
    throw std::runtime_error("checkpoint payload size mismatch: expected " + std::to_string(total * 4) +
                             " bytes, found " + std::to_string(bytes.size()));
  const auto& entries = manifest.at("parameters");
  if (entries.size() != params.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (const auto& e : entries) {
    const auto name = e.at("name").get<std::string>();
    auto* p = params.find(name);
    if (!p) throw std::runtime_error("checkpoint parameter not in model: " + name);
    if (e.at("shape").get<Shape>() != p->value.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    const std::size_t offset = e.at("offset").get<std::size_t>();
    for (std::size_t i = 0; i < p->value.size(); ++i)
      p->value[i] = static_cast<T>(get_f32le(bytes.data() + 4 * (offset + i)));
  }
}

template void save_checkpoint<float>(const fs::path&, const ParameterSet<float>&, const json&);
template void save_checkpoint<double>(const fs::path&, const ParameterSet<double>&, const json&);
template void load_checkpoint<float>(const fs::path&, ParameterSet<float>&);
template void load_checkpoint<double>(const fs::path&, ParameterSet<double>&);

}  // namespace dni
