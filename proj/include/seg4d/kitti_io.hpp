#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "seg4d/frame.hpp"

namespace seg4d::io {

// Scan files: little-endian float32 quadruples (x, y, z, remission).
// Label files: one little-endian uint32 per point; semantic class in the lower
// 16 bits, instance id in the upper 16 bits (dropped on read).
// Pose files: one 3x4 row-major matrix per line, promoted to 4x4.
// Poses are used as given; no camera calibration is applied.

struct Scan {
    std::vector<Vec3> coords;
    std::vector<float> remission;
};

Scan read_scan(const std::filesystem::path& path);
void write_scan(const std::filesystem::path& path, const Scan& scan);

// Raw lower-16-bit semantic ids.
std::vector<std::uint32_t> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<std::uint32_t>& semantic,
                  const std::vector<std::uint32_t>& instance = {});

std::vector<Pose> read_poses(const std::filesystem::path& path);
void write_poses(const std::filesystem::path& path, const std::vector<Pose>& poses);

// Frame <-> scan conversion. Remission becomes the single feature channel.
Frame frame_from_scan(const Scan& scan, const Pose& pose, int frame_index);
Scan scan_from_frame(const Frame& frame);

// Sequence directory layout:
//   <dir>/velodyne/NNNNNN.bin, <dir>/labels/NNNNNN.label, <dir>/poses.txt
// Frame t is file number t. Labels are optional on read; when present every
// scan needs one. `map_label` turns raw semantic ids into dense class ids
// (identity when empty).
std::vector<Frame> read_sequence(const std::filesystem::path& dir,
                                 const std::function<int(std::uint32_t)>& map_label = {});
void write_sequence(const std::filesystem::path& dir, const std::vector<Frame>& frames);

// Dense per-point class ids written as label files under <dir>/NNNNNN.label.
void write_predictions(const std::filesystem::path& dir, int frame_index, const std::vector<int>& classes);
std::vector<int> read_predictions(const std::filesystem::path& file);

std::string frame_file_stem(int frame_index);  // zero-padded to six digits

}  // namespace seg4d::io
