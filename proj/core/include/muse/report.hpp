#pragma once

#include <filesystem>
#include <string>

#include "muse/training.hpp"

namespace muse {

inline constexpr const char* kVersion = "muse 0.1.0";
inline constexpr int kReportSchema = 1;

/// Effective configuration as a JSON object (every field, defaults included).
std::string config_json(const TrainConfig& cfg);

/// {schema, version, dataset, variant, config, per_trial, mean, std,
///  wall_time_s, diagnostics, warnings}. Only wall_time_s varies between
/// identical runs.
std::string report_json(const TrialReport& report);

/// Writes to a sibling temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& file, const std::string& content);

}  // namespace muse
