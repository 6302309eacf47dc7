#pragma once

#include "uum/model.hpp"

#include <cstdint>
#include <string>

namespace uum {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

/// Binary checkpoint: magic, version, config and manifest as JSON, then every
/// parameter as (name, rank, dims, little-endian doubles) in store order.
void save_checkpoint(const Model& model, const std::string& path);

/// Rebuilds the model from the stored config and manifest.
Model load_checkpoint(const std::string& path);

/// Loads tensors into an existing model. Tensor names and shapes are checked
/// first, then the stored config against the model's.
void load_into(Model& model, const std::string& path);

/// 64-bit FNV-1a of the file bytes, as 16 hex digits.
std::string checkpoint_id(const std::string& path);
std::string fnv1a_hex(std::string_view bytes);

} // namespace uum
