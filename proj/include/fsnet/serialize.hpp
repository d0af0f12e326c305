#pragma once

#include <string>

#include "fsnet/harness.hpp"
#include "fsnet/learner.hpp"

#include <json.hpp>

namespace fsnet {

nlohmann::json config_to_json(const ExperimentConfig& config);
// Unknown keys are rejected with an error naming them.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

nlohmann::json result_to_json(const ExperimentResult& result);

// Dataset manifest: csv path, feature columns and windowing for a run.
void apply_manifest(ExperimentConfig& config, const std::string& path);

// Versioned model snapshot round-trip.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Writes via a temp file + rename so partially written outputs never appear.
void atomic_write(const std::string& path, const std::string& contents);

}  // namespace fsnet
