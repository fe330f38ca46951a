#include "seg4d/frame.hpp"

#include <Eigen/LU>
#include <cmath>
#include <string>

#include "seg4d/errors.hpp"

namespace seg4d {

void Frame::validate() const {
    if (features.rows() != coords.size()) {
        throw InvalidInput("frame " + std::to_string(frame_index) + ": " + std::to_string(coords.size()) +
                           " coordinates but " + std::to_string(features.rows()) + " feature rows");
    }
    if (labels && labels->size() != coords.size()) {
        throw InvalidInput("frame " + std::to_string(frame_index) + ": label count " +
                           std::to_string(labels->size()) + " != point count " + std::to_string(coords.size()));
    }
    if (!is_rigid(pose)) {
        throw InvalidInput("frame " + std::to_string(frame_index) + ": pose is not a rigid transform");
    }
}

bool is_rigid(const Pose& pose, double tol) {
    if (!pose.allFinite()) return false;
    const Eigen::Matrix3d r = pose.topLeftCorner<3, 3>();
    if (((r * r.transpose()) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    if (std::abs(r.determinant() - 1.0) > tol) return false;
    const Eigen::RowVector4d last = pose.row(3);
    return (last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() <= tol;
}

Pose rigid_inverse(const Pose& pose) {
    Pose inv = Pose::Identity();
    const Eigen::Matrix3d rt = pose.topLeftCorner<3, 3>().transpose();
    inv.topLeftCorner<3, 3>() = rt;
    inv.topRightCorner<3, 1>() = -rt * pose.topRightCorner<3, 1>();
    return inv;
}

Frame align_to_previous(const Frame& current, const Frame& previous) {
    for (const Frame* f : {&current, &previous}) {
        if (!f->pose.allFinite() || std::abs(f->pose.determinant()) < 1e-12) {
            throw InvalidInput("frame " + std::to_string(f->frame_index) + ": singular pose matrix");
        }
        if (!is_rigid(f->pose)) {
            throw InvalidInput("frame " + std::to_string(f->frame_index) + ": pose is not a rigid transform");
        }
    }
    const Pose relative = rigid_inverse(current.pose) * previous.pose;
    const Eigen::Matrix3d r = relative.topLeftCorner<3, 3>();
    const Vec3 t = relative.topRightCorner<3, 1>();

    Frame out = previous;
    for (auto& c : out.coords) c = r * c + t;
    out.pose = current.pose;
    return out;
}

Frame select_points(const Frame& frame, const std::vector<std::size_t>& keep) {
    Frame out;
    out.pose = frame.pose;
    out.frame_index = frame.frame_index;
    out.coords.reserve(keep.size());
    out.features.resize(keep.size(), frame.features.cols());
    std::vector<int> labels;
    if (frame.labels) labels.reserve(keep.size());
    for (std::size_t n = 0; n < keep.size(); ++n) {
        const std::size_t i = keep[n];
        out.coords.push_back(frame.coords[i]);
        auto src = frame.features.row(i);
        std::copy(src.begin(), src.end(), out.features.row(n).begin());
        if (frame.labels) labels.push_back((*frame.labels)[i]);
    }
    if (frame.labels) out.labels = std::move(labels);
    return out;
}

Frame crop_centered(const Frame& frame, const Vec3& extent, const Vec3& center) {
    std::vector<std::size_t> keep;
    keep.reserve(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) {
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
            if (extent[a] > 0 && std::abs(frame.coords[i][a] - center[a]) > 0.5 * extent[a]) inside = false;
        }
        if (inside) keep.push_back(i);
    }
    return select_points(frame, keep);
}

}  // namespace seg4d
