#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dotsim/device.hpp"
#include "dotsim/noise.hpp"

namespace dotsim {

enum class FrameMode { from_device, calibrate, explicit_frame };

/// Parsed run configuration for the CLI. The raw JSON is kept alongside the
/// typed objects so subcommands can read their own experiment parameters and
/// the manifest can hash exactly what was run.
struct RunConfig {
    nlohmann::json raw;
    DeviceModel device;
    std::optional<NoiseModel> noise;
    GateCorrelation correlation;
    FrameMode frame_mode = FrameMode::from_device;
    std::optional<ControlFrame> frame;  ///< set for explicit_frame
    uint64_t seed = 0;
    bool seed_given = false;
    std::filesystem::path output_dir = "out";
};

nlohmann::json load_json_file(const std::filesystem::path& path);

/// Dotted-path override, e.g. "noise.amplitude=0.3". The value is parsed as
/// JSON when possible, else taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

DeviceModel device_from_json(const nlohmann::json& j);
nlohmann::json device_to_json(const DeviceModel& d);

std::optional<NoiseModel> noise_from_json(const nlohmann::json& j);
GateCorrelation correlation_from_json(const nlohmann::json& j,
                                      const std::vector<std::string>& gates);

ControlFrame frame_from_json(const nlohmann::json& j,
                             const std::vector<std::string>& gates);
nlohmann::json frame_to_json(const ControlFrame& f,
                             const std::vector<std::string>& gates);

RunConfig parse_config(const nlohmann::json& j);

}
