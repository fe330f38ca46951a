#include "seg4d/synthetic.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <random>

#include "seg4d/errors.hpp"

namespace seg4d {
namespace {

struct BoxObject {
    Vec3 size;
    double yaw = 0.0;
    Vec3 start;
    Vec3 velocity = Vec3::Zero();
    int label = 1;
    std::vector<Vec3> surface;  // object-local, centred on the footprint, z up from 0
    std::vector<float> remission;

    Vec3 center(int t) const { return start + velocity * static_cast<double>(t); }

    bool covers(const Vec3& p, int t, double margin) const {
        const Vec3 c = center(t);
        const double dx = p.x() - c.x(), dy = p.y() - c.y();
        const double cs = std::cos(yaw), sn = std::sin(yaw);
        const double lx = cs * dx + sn * dy, ly = -sn * dx + cs * dy;
        return std::abs(lx) <= 0.5 * size.x() + margin && std::abs(ly) <= 0.5 * size.y() + margin;
    }
};

// Area-weighted samples on the top and four side faces of a box.
std::vector<Vec3> sample_box_surface(const Vec3& size, int count, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double sx = size.x(), sy = size.y(), sz = size.z();
    const double areas[5] = {sx * sy, sx * sz, sx * sz, sy * sz, sy * sz};
    const double total = areas[0] + areas[1] + areas[2] + areas[3] + areas[4];
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        double pick = u(rng) * total;
        int face = 0;
        while (face < 4 && pick > areas[face]) pick -= areas[face++];
        const double a = u(rng), b = u(rng);
        switch (face) {
            case 0: pts.emplace_back((a - 0.5) * sx, (b - 0.5) * sy, sz); break;
            case 1: pts.emplace_back((a - 0.5) * sx, -0.5 * sy, b * sz); break;
            case 2: pts.emplace_back((a - 0.5) * sx, 0.5 * sy, b * sz); break;
            case 3: pts.emplace_back(-0.5 * sx, (a - 0.5) * sy, b * sz); break;
            default: pts.emplace_back(0.5 * sx, (a - 0.5) * sy, b * sz); break;
        }
    }
    return pts;
}

}  // namespace

void SyntheticSceneSpec::validate() const {
    if (static_objects < 0 || moving_objects < 0) throw InvalidInput("synthetic: object counts must be >= 0");
    if (frames < 1) throw InvalidInput("synthetic: need at least one frame");
    if (points_per_object < 1 && static_objects + moving_objects > 0) {
        throw InvalidInput("synthetic: points_per_object must be positive");
    }
    if (ground_points < 0) throw InvalidInput("synthetic: ground_points must be >= 0");
    if (!velocities.empty() && static_cast<int>(velocities.size()) != moving_objects) {
        throw InvalidInput("synthetic: need one velocity per moving object");
    }
    if (noise_sigma < 0 || half_extent <= 0) throw InvalidInput("synthetic: bad noise or extent");
    if ((size_max - size_min).minCoeff() < 0 || size_min.minCoeff() <= 0) throw InvalidInput("synthetic: bad sizes");
    if (speed_min < 0 || speed_max < speed_min) throw InvalidInput("synthetic: bad speed range");
}

ClassMap synthetic_class_map(SyntheticScheme scheme) {
    if (scheme == SyntheticScheme::Speeds) {
        return ClassMap({"ground", "static-object", "slow-moving-object", "fast-moving-object"}, {});
    }
    return synthetic_class_map();
}

std::vector<Frame> generate_synthetic_sequence(const SyntheticSceneSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double e = spec.half_extent;
    const int horizon = spec.frames - 1;

    std::vector<BoxObject> objects;
    const int total = spec.static_objects + spec.moving_objects;
    for (int o = 0; o < total; ++o) {
        const bool moving = o >= spec.static_objects;
        BoxObject box;
        for (int a = 0; a < 3; ++a) box.size[a] = spec.size_min[a] + u(rng) * (spec.size_max[a] - spec.size_min[a]);
        box.yaw = u(rng) * std::numbers::pi;
        box.surface = sample_box_surface(box.size, spec.points_per_object, rng);
        box.remission.resize(box.surface.size());
        for (auto& r : box.remission) r = static_cast<float>(0.3 + 0.4 * u(rng));

        if (moving) {
            const int m = o - spec.static_objects;
            if (!spec.velocities.empty()) {
                box.velocity = spec.velocities[static_cast<std::size_t>(m)];
            } else {
                const double heading = u(rng) * 2.0 * std::numbers::pi;
                const double speed = spec.speed_min + u(rng) * (spec.speed_max - spec.speed_min);
                box.velocity = Vec3(speed * std::cos(heading), speed * std::sin(heading), 0.0);
            }
            const double speed = box.velocity.head<2>().norm();
            if (spec.scheme == SyntheticScheme::Speeds) {
                box.label = speed > spec.fast_speed_threshold ? 3 : 2;
            } else {
                box.label = 2;
            }
        }
        // Start so the whole trajectory stays inside the scene when possible.
        const double margin = 0.5 * std::max(box.size.x(), box.size.y());
        for (int a = 0; a < 2; ++a) {
            const double travel = box.velocity[a] * horizon;
            double lo = -e + margin - std::min(0.0, travel);
            double hi = e - margin - std::max(0.0, travel);
            if (lo > hi) lo = hi = -0.5 * travel;
            box.start[a] = lo + u(rng) * (hi - lo);
        }
        box.start.z() = 0.0;
        objects.push_back(std::move(box));
    }

    std::vector<Vec3> ground(static_cast<std::size_t>(spec.ground_points));
    std::vector<float> ground_remission(ground.size());
    for (std::size_t i = 0; i < ground.size(); ++i) {
        ground[i] = Vec3((2.0 * u(rng) - 1.0) * e, (2.0 * u(rng) - 1.0) * e, 0.0);
        ground_remission[i] = static_cast<float>(0.05 + 0.2 * u(rng));
    }

    std::vector<Frame> frames;
    frames.reserve(static_cast<std::size_t>(spec.frames));
    for (int t = 0; t < spec.frames; ++t) {
        std::vector<Vec3> coords;
        std::vector<float> rem;
        std::vector<int> labels;
        for (std::size_t i = 0; i < ground.size(); ++i) {
            bool hidden = false;
            for (const auto& obj : objects) {
                if (obj.covers(ground[i], t, 0.0)) {
                    hidden = true;
                    break;
                }
            }
            // Noise is drawn for every template point so the stream stays aligned across frames.
            const Vec3 n(noise(rng), noise(rng), noise(rng));
            if (hidden) continue;
            coords.push_back(ground[i] + spec.noise_sigma * n);
            rem.push_back(ground_remission[i]);
            labels.push_back(0);
        }
        for (const auto& obj : objects) {
            const Eigen::Matrix3d rot = Eigen::AngleAxisd(obj.yaw, Vec3::UnitZ()).toRotationMatrix();
            const Vec3 c = obj.center(t);
            for (std::size_t i = 0; i < obj.surface.size(); ++i) {
                const Vec3 n(noise(rng), noise(rng), noise(rng));
                coords.push_back(rot * obj.surface[i] + c + spec.noise_sigma * n);
                rem.push_back(obj.remission[i]);
                labels.push_back(obj.label);
            }
        }
        Frame f;
        f.coords = std::move(coords);
        f.features.resize(f.coords.size(), 1);
        for (std::size_t i = 0; i < rem.size(); ++i) f.features(i, 0) = rem[i];
        f.labels = std::move(labels);
        f.pose = Pose::Identity();
        f.frame_index = t;
        frames.push_back(std::move(f));
    }
    return frames;
}

}  // namespace seg4d
