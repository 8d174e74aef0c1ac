#pragma once

#include "invaria/types.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace invaria {

// Point files.
//
//   PTS1 <N> <C_in> <has_labels>\n      text; then N lines "x y z f1..fC [label]"
//   PTSB1 <N> <C_in> <has_labels>\n     binary; then N records of (3 + C_in) little-endian
//                                        float32 values followed by an int32 label when
//                                        has_labels is 1
//
// Values are stored at single precision. Text output prints 9 significant digits,
// enough to recover every float32 exactly.

enum class PtsFormat { kText, kBinary };

std::string serialize_pts(const PointCloud& pc, PtsFormat format = PtsFormat::kBinary);
PointCloud parse_pts(std::string_view bytes);

PointCloud load_pts(const std::filesystem::path& path);
void save_pts(const std::filesystem::path& path, const PointCloud& pc, PtsFormat format = PtsFormat::kBinary);

/// Rounds every coordinate and feature to the nearest float32, as a save/load cycle would.
PointCloud round_to_storage_precision(const PointCloud& pc);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace invaria
