#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvlab/world/world_model.hpp"

namespace mvlab {

// Little-endian float64 arrays as base64 text.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(const std::string& text);

// JSON document with "schema": "world-v1". Arrays are stored bit-exactly, so
// a round trip reproduces the world and its renders exactly.
std::string world_to_json(const WorldModel& world);
WorldModel world_from_json(const std::string& text);

void save_world(const WorldModel& world, const std::filesystem::path& path);
WorldModel load_world(const std::filesystem::path& path);

}  // namespace mvlab
