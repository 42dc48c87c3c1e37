#pragma once

#include <filesystem>

#include "aigflow/model.hpp"

namespace aigflow {

/// Writes `manifest` (JSON: config, parameter names, shapes, byte offsets)
/// and a sibling `.bin` blob of little-endian doubles.
void save_checkpoint(const Model& model, const std::filesystem::path& manifest);

/// Rebuilds the model from the manifest config and loads the blob. The
/// parameter table must match the model layout exactly.
Model load_checkpoint(const std::filesystem::path& manifest);

/// Loads values into an existing model with an identical parameter table.
void load_parameters(Model& model, const std::filesystem::path& manifest);

}  // namespace aigflow
