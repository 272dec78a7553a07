#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xsense/nn/tensor.hpp"

namespace xsense::nn {

// A JSON manifest (tensor names, shapes, payload offsets and free-form
// metadata) next to a payload of little-endian float64 values. Saving to
// "model.json" writes "model.json" and "model.json.bin".
struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor2>> tensors;

  void add(std::string name, const Tensor2& t) { tensors.emplace_back(std::move(name), t); }
  const Tensor2& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

std::filesystem::path payload_path(const std::filesystem::path& manifest_path);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& manifest_path);
Checkpoint load_checkpoint(const std::filesystem::path& manifest_path);

}  // namespace xsense::nn
