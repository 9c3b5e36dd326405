#pragma once

// Flat `key = value` run configuration. Lines starting with '#' are comments,
// unknown keys are rejected, and every key defaults to the published
// tracker constants.

#include "metrack/identify.hpp"
#include "metrack/tracker.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace metrack {

struct RunConfig {
    TrackerConfig tracker;
    std::filesystem::path input_dir;
    std::optional<BoundingBox> init_box;
    std::filesystem::path trajectory_out = "trajectory.csv";
    std::filesystem::path diagnostics_out = "diagnostics.json";
    std::filesystem::path identities_out = "identities.csv";
    OcclusionConfig occlusion;
    /// Used for tracker.structured when the structured learner is enabled.
    StructuredConfig structured_params;
};

struct ConfigKey {
    std::string name;
    std::string default_value;
    std::string description;
};

/// All accepted keys in file order, with defaults rendered as text.
const std::vector<ConfigKey>& config_keys();

/// Parses config text. `origin` prefixes error messages; relative paths are
/// resolved against `base_dir`.
RunConfig parse_config(const std::string& text, const std::string& origin,
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// A complete config file listing every key at its default.
std::string default_config_text();

/// Renders a config that parses back to `cfg` (paths as given).
std::string format_config(const RunConfig& cfg);

}  // namespace metrack
