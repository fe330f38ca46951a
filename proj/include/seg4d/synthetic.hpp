#pragma once

#include <cstdint>
#include <vector>

#include "seg4d/class_map.hpp"
#include "seg4d/frame.hpp"

namespace seg4d {

enum class SyntheticScheme {
    StaticMoving,  // ground, static-object, moving-object
    Speeds,        // ground, static-object, slow-moving, fast-moving
};

// Box objects on a flat ground plane. Static and moving objects draw their
// size, yaw, surface samples and remission from the same distributions, so a
// single frame carries no information about which boxes move.
struct SyntheticSceneSpec {
    int static_objects = 4;
    int moving_objects = 4;
    // Per moving object velocity in m/frame. When empty, each moving object gets
    // a random horizontal heading and a speed in [speed_min, speed_max].
    std::vector<Vec3> velocities;
    double speed_min = 0.6;
    double speed_max = 1.0;
    double fast_speed_threshold = 0.8;  // Speeds scheme split
    int frames = 20;
    int points_per_object = 300;
    int ground_points = 2000;
    double noise_sigma = 0.02;
    double half_extent = 15.0;  // scene is [-half_extent, half_extent]^2
    Vec3 size_min{1.2, 1.2, 0.8};
    Vec3 size_max{2.0, 2.0, 1.6};
    SyntheticScheme scheme = SyntheticScheme::StaticMoving;

    void validate() const;
};

ClassMap synthetic_class_map(SyntheticScheme scheme);

// Deterministic in (spec, seed). Poses are identity; frame_index = t.
std::vector<Frame> generate_synthetic_sequence(const SyntheticSceneSpec& spec, std::uint64_t seed);

}  // namespace seg4d
