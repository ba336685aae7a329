#pragma once

#include "splinestroke/grad/tensor.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace splinestroke::grad {

using NamedTensors = std::map<std::string, Tensor>;

/// `{name: {"shape": [...], "data": [...]}}`. Doubles are written in
/// shortest round-trip form, so reading back is value-exact.
nlohmann::json to_json(const NamedTensors& tensors);
NamedTensors from_json(const nlohmann::json& doc);

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::filesystem::path& path);

}  // namespace splinestroke::grad
