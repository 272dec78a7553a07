#include "xsense/nn/checkpoint.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "xsense/error.hpp"

namespace xsense::nn {

namespace {

constexpr const char* kFormat = "xsense-checkpoint";
constexpr int kVersion = 1;

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return out;
  }
  return v;
}

}  // namespace

const Tensor2& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError(fmt::format("checkpoint has no tensor '{}'", name));
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& entry : tensors) {
    if (entry.first == name) return true;
  }
  return false;
}

std::filesystem::path payload_path(const std::filesystem::path& manifest_path) {
  return std::filesystem::path(manifest_path.string() + ".bin");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& manifest_path) {
  const auto bin_path = payload_path(manifest_path);
  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw DataError(fmt::format("cannot write {}", bin_path.string()));

  nlohmann::json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = kVersion;
  manifest["payload"] = bin_path.filename().string();
  manifest["metadata"] = ckpt.metadata;
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    manifest["tensors"].push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"offset", offset}});
    for (double v : t.data()) {
      std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
      bin.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    offset += t.size() * sizeof(double);
  }
  if (!bin) throw DataError(fmt::format("write failed for {}", bin_path.string()));

  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", manifest_path.string()));
  out << manifest.dump(2) << '\n';
  if (!out) throw DataError(fmt::format("write failed for {}", manifest_path.string()));
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError(fmt::format("cannot open checkpoint {}", manifest_path.string()));
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("malformed checkpoint manifest {}: {}", manifest_path.string(), e.what()));
  }
  if (manifest.value("format", "") != kFormat) {
    throw DataError(fmt::format("{} is not an xsense checkpoint", manifest_path.string()));
  }
  const auto bin_path = manifest_path.parent_path() / manifest.at("payload").get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError(fmt::format("cannot open checkpoint payload {}", bin_path.string()));

  Checkpoint ckpt;
  ckpt.metadata = manifest.at("metadata");
  for (const auto& entry : manifest.at("tensors")) {
    Tensor2 t(entry.at("rows").get<std::size_t>(), entry.at("cols").get<std::size_t>());
    bin.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    for (double& v : t.data()) {
      std::uint64_t bits = 0;
      bin.read(reinterpret_cast<char*>(&bits), sizeof bits);
      v = std::bit_cast<double>(to_little_endian(bits));
    }
    if (!bin) throw DataError(fmt::format("truncated checkpoint payload {}", bin_path.string()));
    ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return ckpt;
}

}  // namespace xsense::nn
