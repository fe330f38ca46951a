#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "seg4d/tensor.hpp"

namespace seg4d {

using Vec3 = Eigen::Vector3d;
using Pose = Eigen::Matrix4d;

// One LiDAR scan: continuous coordinates (meters, sensor frame), per-point
// features, optional per-point class ids and the sensor-to-world pose.
struct Frame {
    std::vector<Vec3> coords;
    Matrix<float> features;
    std::optional<std::vector<int>> labels;
    Pose pose = Pose::Identity();
    int frame_index = 0;

    std::size_t size() const { return coords.size(); }
    std::size_t feature_width() const { return features.cols(); }

    // Throws InvalidInput when lengths disagree or the pose is not rigid.
    void validate() const;
};

// Rigidity check: orthonormal rotation block within 1e-9, det +1, last row (0,0,0,1).
bool is_rigid(const Pose& pose, double tol = 1e-9);

// Inverse of a rigid transform using the transpose of the rotation block.
Pose rigid_inverse(const Pose& pose);

// Returns `previous` with coordinates expressed in the sensor frame of `current`
// (pose_current^-1 * pose_previous). Features, labels and frame_index are kept.
Frame align_to_previous(const Frame& current, const Frame& previous);

// Keeps points whose coordinates lie inside an axis-aligned box of the given
// full extent centred at `center`. A non-positive extent component disables
// cropping along that axis.
Frame crop_centered(const Frame& frame, const Vec3& extent, const Vec3& center = Vec3::Zero());

// Keeps the listed points in the given order.
Frame select_points(const Frame& frame, const std::vector<std::size_t>& keep);

}  // namespace seg4d
