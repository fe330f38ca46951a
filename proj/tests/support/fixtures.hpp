#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "seg4d/frame.hpp"

namespace fixtures {

inline std::vector<seg4d::Vec3> random_points(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<seg4d::Vec3> pts(n);
    for (auto& p : pts) p = seg4d::Vec3(u(rng), u(rng), u(rng));
    return pts;
}

inline std::vector<seg4d::Vec3> random_cells(std::mt19937_64& rng, std::size_t n, int lo, int hi) {
    std::uniform_int_distribution<int> u(lo, hi);
    std::vector<seg4d::Vec3> pts(n);
    for (auto& p : pts) p = seg4d::Vec3(u(rng), u(rng), u(rng));
    return pts;
}

inline seg4d::Frame random_frame(std::mt19937_64& rng, std::size_t n, double extent, int classes = 3,
                                 int frame_index = 0) {
    seg4d::Frame f;
    f.coords = random_points(rng, n, -extent, extent);
    f.features.resize(n, 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> lab(0, classes - 1);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.features(i, 0) = static_cast<float>(u(rng));
        labels[i] = lab(rng);
    }
    f.labels = labels;
    f.frame_index = frame_index;
    return f;
}

inline seg4d::Pose random_rigid(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    seg4d::Pose p = seg4d::Pose::Identity();
    p.block<3, 3>(0, 0) = q.toRotationMatrix();
    p.block<3, 1>(0, 3) = seg4d::Vec3(n(rng), n(rng), n(rng)) * 5.0;
    return p;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("seg4d_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixtures
