#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gentoc/numerics/tensor.hpp"

namespace gentoc::numerics {

inline constexpr const char* kCheckpointMagic = "GENTOC-CKPT-1";

/// On-disk layout:
///   line 1: GENTOC-CKPT-1
///   line 2: manifest JSON (single line) = caller metadata under "model" plus
///           "parameters": [{"name", "shape": [rows, cols]}...]
///   rest:   float32 little-endian buffers, concatenated in manifest order.
struct Checkpoint {
  nlohmann::json model;
  ParameterSet<float> params;
};

void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& model,
                      const ParameterSet<float>& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Manifest only (does not read parameter buffers).
nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path);

}  // namespace gentoc::numerics
