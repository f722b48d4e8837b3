#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "darnwalk/geometry.hpp"
#include "darnwalk/measures.hpp"

namespace darnwalk {

using Json = nlohmann::json;

/// A configuration document: the darned space plus an optional explicit compact.
struct ConfigDocument {
    Configuration config;
    std::optional<CompactDescription> compact;
};

/// Schema:
///   {"shells": [{"component", "dim", "center", "inner_radius", "outer_radius",
///                "orientation": "outward"|"inward", "weight"}],
///    "defaults": {"epsilon", "r0", "max_steps"},          (optional)
///    "components": [{"id", "dim"}],                        (optional)
///    "compact": [{"component", "center", "kind": "ball", "radius"} |
///                {"component", "center", "kind": "shell", "inner_radius", "outer_radius"}]}
/// Schema problems raise ParseError; violated invariants raise InvariantViolation.
ConfigDocument parse_config(const Json& doc);
/// Reads and parses a file; IoError when unreadable, ParseError on bad JSON.
ConfigDocument load_config(const std::string& path);
Json read_json_file(const std::string& path);

Json config_to_json(const Configuration& config);
CompactDescription parse_compact(const Json& pieces);
Json compact_to_json(const CompactDescription& compact);

/// Parametric: {"kind": "parametric", "level", "weights"}.
/// Empirical: {"kind": "empirical", "level", "mc_samples", "atoms": [{"shell", "point", "weight"}]}.
Json measure_to_json(const SphereMeasure& measure);
SphereMeasure measure_from_json(const Configuration& config, const Json& doc);
/// A family serializes as a JSON array of its members.
Json family_to_json(const MeasureFamily& family);
MeasureFamily family_from_json(const Configuration& config, const Json& doc);

}  // namespace darnwalk
