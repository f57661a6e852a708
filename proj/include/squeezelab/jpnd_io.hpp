#pragma once

#include <filesystem>

#include "json.hpp"
#include "squeezelab/distributions.hpp"

namespace squeezelab {

/// jpnd-v1: {"format":"jpnd-v1","dim_s":S,"dim_i":I,"probs":[row-major],
/// "n_events":N?,"truncated_mass":t}. Histograms carry integer "counts"
/// instead of "probs".
nlohmann::json to_json(const JointDist& j);
JointDist joint_from_json(const nlohmann::json& doc);

void write_jpnd(const std::filesystem::path& path, const JointDist& j);
JointDist read_jpnd(const std::filesystem::path& path);

/// Reads a whole file; throws Error(Io) on failure.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace squeezelab
