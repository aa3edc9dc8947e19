#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pcflow/point_cloud.hpp"

namespace pcflow {

// XYZ text: one point per line, three whitespace-separated decimals.
// Lines starting with '#' and blank lines are skipped.

PointCloud read_xyz(const std::filesystem::path& path);
PointCloud parse_xyz(const std::string& text);

/// Writes with 17 significant digits; `comments` become leading '#' lines.
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<std::string>& comments = {});
std::string format_xyz(const PointCloud& cloud, const std::vector<std::string>& comments = {});

}  // namespace pcflow
