#pragma once

#include <string>

#include "fscil/sessions.hpp"

namespace fscil {

// Binary snapshot of a run between sessions. Parameters round-trip
// bit-exactly, so resuming reproduces the uninterrupted run byte for byte.
void save_checkpoint(const std::string& path, const PipelineState& state);
PipelineState load_checkpoint(const std::string& path);

// throws ConfigError when the loaded run used a different configuration
void require_same_config(const PipelineState& state, const PipelineConfig& cfg);

}  // namespace fscil
