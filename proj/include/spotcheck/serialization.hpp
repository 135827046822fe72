#pragma once

#include <string>

#include <json.hpp>

#include "spotcheck/blindspots.hpp"
#include "spotcheck/metrics.hpp"
#include "spotcheck/scenegen.hpp"

namespace spotcheck {

using Json = nlohmann::ordered_json;

Json to_json(const ValueAssignment& v);
ValueAssignment value_assignment_from_json(const Json& j);

Json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const Json& j);

Json to_json(const BlindspotSpec& b);
BlindspotSpec blindspot_from_json(const Json& j);

Json to_json(const SceneDescription& scene);
SceneDescription scene_from_json(const Json& j);

/// `[{rank, importance, image_ids:[...]}, ...]`
Json to_json(const HypothesisList& hyps);
HypothesisList hypotheses_from_json(const Json& j);

Json to_json(const MetricReport& report);
Json to_json(const Aggregate& a);

Json read_json_file(const std::string& path);
void write_json_file(const Json& j, const std::string& path);

/// FNV-1a, rendered as 16 hex digits.
std::string hash_hex(const std::string& text);

/// Parses a configuration file: JSON, or TOML (tables, dotted table headers,
/// `key = value` with strings, numbers, booleans and flat arrays).
Json load_config_file(const std::string& path);
Json parse_toml(const std::string& text);

}  // namespace spotcheck
