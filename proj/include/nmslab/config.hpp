#ifndef NMSLAB_CONFIG_HPP
#define NMSLAB_CONFIG_HPP

#include <json.hpp>

#include "nmslab/clock.hpp"
#include "nmslab/detector.hpp"
#include "nmslab/noise.hpp"

namespace nmslab {

// JSON round trips for the pieces of a run configuration. Parsers accept
// partial objects and fill the rest from defaults; serializers always emit
// every field so the snapshot written into a run directory is complete.

nlohmann::json to_json(const NoiseSpec& spec);
NoiseSpec noise_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SyntheticDetectorConfig& config);
SyntheticDetectorConfig detector_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ClockSpec& spec);
ClockSpec clock_from_json(const nlohmann::json& j);

std::string to_string(ClockMode mode);
std::string to_string(NmsVariant variant);

}  // namespace nmslab

#endif  // NMSLAB_CONFIG_HPP
