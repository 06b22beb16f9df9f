#include "gentoc/numerics/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace gentoc::numerics {

namespace {

std::uint32_t to_little(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::little) {
    return x;
  } else {
    return ((x & 0xFFu) << 24) | ((x & 0xFF00u) << 8) | ((x >> 8) & 0xFF00u) | (x >> 24);
  }
}

nlohmann::json read_manifest(std::istream& in, const std::filesystem::path& path) {
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) {
    throw NumericsError("checkpoint " + path.string() + ": bad header '" + magic.substr(0, 32) + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw NumericsError("checkpoint " + path.string() + ": missing manifest");
  }
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw NumericsError("checkpoint " + path.string() + ": malformed manifest: " + e.what());
  }
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& model,
                      const ParameterSet<float>& params) {
  nlohmann::json manifest;
  manifest["model"] = model;
  manifest["dtype"] = "f32le";
  auto& list = manifest["parameters"] = nlohmann::json::array();
  for (const auto& p : params.items()) {
    list.push_back({{"name", p.name}, {"shape", {p.tensor.shape.rows, p.tensor.shape.cols}}});
  }
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw NumericsError("cannot write checkpoint " + path.string());
  }
  out << kCheckpointMagic << '\n' << manifest.dump() << '\n';
  std::vector<std::uint32_t> words;
  for (const auto& p : params.items()) {
    words.resize(p.tensor.values.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
      words[i] = to_little(std::bit_cast<std::uint32_t>(p.tensor.values[i]));
    }
    out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  }
  if (!out) {
    throw NumericsError("short write to checkpoint " + path.string());
  }
}

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw NumericsError("cannot open checkpoint " + path.string());
  }
  return read_manifest(in, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw NumericsError("cannot open checkpoint " + path.string());
  }
  const auto manifest = read_manifest(in, path);
  Checkpoint ckpt;
  ckpt.model = manifest.at("model");
  std::vector<std::uint32_t> words;
  for (const auto& entry : manifest.at("parameters")) {
    const auto& shape = entry.at("shape");
    const int idx = ckpt.params.add(entry.at("name").get<std::string>(),
                                    Shape{shape.at(0).get<int>(), shape.at(1).get<int>()});
    auto& t = ckpt.params[idx];
    words.resize(t.values.size());
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    if (!in) {
      throw NumericsError("checkpoint " + path.string() + ": truncated buffer for " + entry.at("name").dump());
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
      t.values[i] = std::bit_cast<float>(to_little(words[i]));
    }
  }
  return ckpt;
}

}  // namespace gentoc::numerics
