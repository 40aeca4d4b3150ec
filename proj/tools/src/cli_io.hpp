#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dwa/corpus.hpp"
#include "dwa/segmentation.hpp"

namespace dwa::cli {

/// Reads a synthetic-corpus config (JSON object with SynthConfig field
/// names); unknown keys are rejected.
SynthConfig load_synth_config(const std::filesystem::path& path);
std::string synth_config_json(const SynthConfig& config);

/// Per-timestamp predictions as `index,prediction` rows.
void write_predictions(const TimelinePrediction& timeline, const std::filesystem::path& path);
TimelinePrediction read_predictions(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace dwa::cli
