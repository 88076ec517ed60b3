#pragma once

#include <filesystem>

#include "mstaog/aog.hpp"

namespace mstaog {

inline constexpr int kArchiveVersion = 1;

/// Writes `dir/index.json` (configuration, part definitions, pose and action
/// tables, array shapes and offsets) and `dir/weights.bin` (little-endian
/// float32 arrays in index order).
void save_archive(const ModelArchive& archive, const std::filesystem::path& dir);

ModelArchive load_archive(const std::filesystem::path& dir);

/// Rounds every array stored as float32 so an in-memory model equals its
/// archived form.
void quantize_to_float(PoseModel& pose);
void quantize_to_float(ActionModel& action);

}  // namespace mstaog
