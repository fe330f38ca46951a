#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "seg4d/config.hpp"
#include "seg4d/evaluate.hpp"
#include "seg4d/kitti_io.hpp"
#include "seg4d/synthetic.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace seg4d;

namespace {

std::vector<int> random_ids(std::mt19937_64& rng, std::size_t n, int classes) {
    std::uniform_int_distribution<int> d(0, classes - 1);
    std::vector<int> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

Vec3 centroid_of(const Frame& f, int label) {
    Vec3 s = Vec3::Zero();
    int n = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if ((*f.labels)[i] != label) continue;
        s += f.coords[i];
        ++n;
    }
    return s / n;
}

}  // namespace

TEST_CASE("evaluation examples") {
    const ClassMap two({"a", "b"}, {});
    std::vector<int> gt(200, 0), pred(200, 0);
    std::fill(gt.begin() + 100, gt.end(), 1);

    const auto perfect = evaluate_labels(gt, gt, two);
    CHECK(perfect.iou[0] == 1.0);
    CHECK(perfect.iou[1] == 1.0);
    CHECK(perfect.miou == 1.0);

    // All-one-class predictor on a balanced set.
    const auto flat = evaluate_labels(pred, gt, two);
    CHECK(flat.iou[0] == 0.5);
    CHECK(flat.iou[1] == 0.0);
    CHECK(flat.miou == 0.25);

    // TP=50, FP=25, FN=25 for class 1.
    std::vector<int> g2, p2;
    auto push = [&](int g, int p, int count) {
        for (int i = 0; i < count; ++i) {
            g2.push_back(g);
            p2.push_back(p);
        }
    };
    push(1, 1, 50);
    push(0, 1, 25);
    push(1, 0, 25);
    push(0, 0, 100);
    const auto r = evaluate_labels(p2, g2, two);
    CHECK(r.confusion.true_positives(1) == 50);
    CHECK(r.confusion.false_positives(1) == 25);
    CHECK(r.confusion.false_negatives(1) == 25);
    CHECK(r.iou[1] == 0.5);

    CHECK_THROWS_AS(evaluate_labels(std::vector<int>(3, 0), std::vector<int>(4, 0), two), StructuralError);
    CHECK_THROWS_AS(evaluate_labels(std::vector<int>{5}, std::vector<int>{0}, two), InvalidInput);
}

TEST_CASE("evaluation matches a per-point counting oracle") {
    std::mt19937_64 rng(31);
    const ClassMap cm({"u", "a", "b", "c", "d"}, {0});
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 50 + rng() % 500;
        const auto gt = random_ids(rng, n, 5);
        const auto pred = random_ids(rng, n, 5);
        const auto rep = evaluate_labels(pred, gt, cm);
        const auto ref = oracle::count_classes(pred, gt, 5, {0});
        double sum = 0.0;
        int used = 0;
        std::uint64_t evaluated = 0;
        for (int g : gt) evaluated += g != 0;
        CHECK(rep.confusion.total() == evaluated);
        CHECK(std::isnan(rep.iou[0]));
        for (std::size_t c = 1; c < 5; ++c) {
            CHECK(rep.confusion.true_positives(c) == ref.tp[c]);
            CHECK(rep.confusion.false_positives(c) == ref.fp[c]);
            CHECK(rep.confusion.false_negatives(c) == ref.fn[c]);
            const auto denom = ref.tp[c] + ref.fp[c] + ref.fn[c];
            const double iou = denom ? static_cast<double>(ref.tp[c]) / static_cast<double>(denom) : 0.0;
            CHECK(rep.iou[c] == iou);
            if (ref.tp[c] + ref.fn[c] > 0) {
                sum += iou;
                ++used;
            }
        }
        CHECK(rep.miou == doctest::Approx(sum / used).epsilon(1e-15));
    }
}

TEST_CASE("evaluation is invariant to point order") {
    std::mt19937_64 rng(32);
    const ClassMap cm({"a", "b", "c"}, {});
    const auto gt = random_ids(rng, 400, 3);
    const auto pred = random_ids(rng, 400, 3);
    std::vector<std::size_t> perm(400);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> g2(400), p2(400);
    for (std::size_t i = 0; i < 400; ++i) {
        g2[i] = gt[perm[i]];
        p2[i] = pred[perm[i]];
    }
    const auto a = evaluate_labels(pred, gt, cm), b = evaluate_labels(p2, g2, cm);
    CHECK(a.miou == b.miou);
    for (std::size_t c = 0; c < 3; ++c) CHECK(a.iou[c] == b.iou[c]);
}

TEST_CASE("absent classes") {
    const ClassMap cm({"a", "b", "c"}, {});
    const std::vector<int> gt{0, 0, 1, 1};
    const std::vector<int> pred{0, 0, 1, 1};
    const auto present = evaluate_labels(pred, gt, cm);
    CHECK(std::isnan(present.iou[2]));
    CHECK_FALSE(present.in_mean[2]);
    CHECK(present.miou == 1.0);
    const auto all = evaluate_labels(pred, gt, cm, {false});
    CHECK(all.miou == doctest::Approx(2.0 / 3.0));

    // Predicted but absent from the ground truth: IoU 0, still outside the mean.
    const std::vector<int> wrong{0, 2, 1, 1};
    const auto w = evaluate_labels(wrong, gt, cm);
    CHECK(w.iou[2] == 0.0);
    CHECK_FALSE(w.in_mean[2]);
    CHECK(w.miou == doctest::Approx((0.5 + 1.0) / 2.0));

    const std::string csv = present.to_csv(cm);
    CHECK(csv.find("class,iou\n") == 0);
    CHECK(csv.find("c,nan\n") != std::string::npos);
    CHECK(csv.find("mIoU,1.000000\n") != std::string::npos);
}

TEST_CASE("evaluate over prediction sets") {
    std::mt19937_64 rng(33);
    const ClassMap cm = synthetic_class_map();
    std::vector<Frame> frames;
    std::vector<PredictionSet> preds;
    for (int t = 0; t < 3; ++t) {
        frames.push_back(fixtures::random_frame(rng, 60, 2.0, 3, t));
        preds.push_back(PredictionSet::one_hot(*frames.back().labels, 3, t));
    }
    CHECK(evaluate(preds, frames, cm).miou == 1.0);
    preds.pop_back();
    CHECK_THROWS_AS(evaluate(preds, frames, cm), StructuralError);
}

TEST_CASE("scan, label and pose files round trip") {
    const auto dir = fixtures::scratch_dir("io");
    std::mt19937_64 rng(34);
    io::Scan scan;
    std::uniform_real_distribution<float> u(-50.0f, 50.0f);
    for (int i = 0; i < 1000; ++i) {
        scan.coords.emplace_back(u(rng), u(rng), u(rng));
        scan.remission.push_back(std::abs(u(rng)) / 50.0f);
    }
    io::write_scan(dir / "a.bin", scan);
    CHECK(std::filesystem::file_size(dir / "a.bin") == 16000);
    const auto back = io::read_scan(dir / "a.bin");
    CHECK(back.coords == scan.coords);
    CHECK(back.remission == scan.remission);
    io::write_scan(dir / "b.bin", back);
    std::ifstream fa(dir / "a.bin", std::ios::binary), fb(dir / "b.bin", std::ios::binary);
    CHECK(std::string(std::istreambuf_iterator<char>(fa), {}) == std::string(std::istreambuf_iterator<char>(fb), {}));

    std::vector<std::uint32_t> sem{0, 10, 252, 65535}, inst{0, 7, 3, 65535};
    io::write_labels(dir / "a.label", sem, inst);
    CHECK(io::read_labels(dir / "a.label") == sem);
    CHECK_THROWS_AS(io::write_labels(dir / "x.label", {70000}), InvalidInput);

    std::vector<Pose> poses{Pose::Identity(), fixtures::random_rigid(rng), fixtures::random_rigid(rng)};
    io::write_poses(dir / "poses.txt", poses);
    const auto pb = io::read_poses(dir / "poses.txt");
    REQUIRE(pb.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(pb[i] == poses[i]);

    {
        std::ofstream(dir / "bad.bin", std::ios::binary) << "12345";
        std::ofstream(dir / "bad.label", std::ios::binary) << "123";
        std::ofstream(dir / "bad.txt") << "1 0 0 0 0 1 0 0 0 0 1\n";
    }
    CHECK_THROWS_AS(io::read_scan(dir / "bad.bin"), IoError);
    CHECK_THROWS_AS(io::read_labels(dir / "bad.label"), IoError);
    CHECK_THROWS_AS(io::read_poses(dir / "bad.txt"), IoError);
    CHECK_THROWS_AS(io::read_scan(dir / "missing.bin"), IoError);

    const Frame f = io::frame_from_scan(scan, poses[1], 4);
    CHECK(f.frame_index == 4);
    CHECK(f.feature_width() == 1);
    CHECK(f.features(3, 0) == scan.remission[3]);
    const auto s2 = io::scan_from_frame(f);
    CHECK(s2.coords == scan.coords);
    CHECK(s2.remission == scan.remission);
}

TEST_CASE("label words keep only the semantic half") {
    const auto dir = fixtures::scratch_dir("labels");
    const std::uint32_t words[3] = {(5u << 16) | 10u, (1u << 16) | 252u, 40u};
    {
        std::ofstream out(dir / "w.label", std::ios::binary);
        out.write(reinterpret_cast<const char*>(words), sizeof(words));
    }
    CHECK(io::read_labels(dir / "w.label") == std::vector<std::uint32_t>{10, 252, 40});
}

TEST_CASE("key-value configuration") {
    const auto c = KeyValueConfig::parse("# comment\n voxel_unit = 0.5 \n\nname=abc\nflag = true\nlist = 1, 2,3\nn = 12\n");
    CHECK(c.get_double("voxel_unit", 0.0) == 0.5);
    CHECK(c.get_string("name", "") == "abc");
    CHECK(c.get_bool("flag", false));
    CHECK(c.get_int("n", 0) == 12);
    CHECK(c.get_doubles("list", {}) == std::vector<double>{1, 2, 3});
    CHECK(c.get_double("missing", 7.0) == 7.0);
    CHECK_NOTHROW(c.require_known({"voxel_unit", "name", "flag", "list", "n"}));
    CHECK_THROWS_AS(c.require_known({"voxel_unit"}), UsageError);

    CHECK_THROWS_AS(KeyValueConfig::parse("just words\n"), UsageError);
    CHECK_THROWS_AS(KeyValueConfig::parse("= 3\n"), UsageError);
    CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), UsageError);
    CHECK_THROWS_AS(KeyValueConfig::parse("a = x1\n").get_double("a", 0), UsageError);
    CHECK_THROWS_AS(KeyValueConfig::parse("a = 1.5\n").get_int("a", 0), UsageError);
    CHECK_THROWS_AS(KeyValueConfig::parse("a = maybe\n").get_bool("a", false), UsageError);
    CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/seg4d.cfg"), UsageError);

    const auto round = KeyValueConfig::parse(c.dump());
    CHECK(round.entries() == c.entries());
}

TEST_CASE("synthetic sequences") {
    SyntheticSceneSpec spec;
    spec.frames = 3;
    const auto a = generate_synthetic_sequence(spec, 9);
    const auto b = generate_synthetic_sequence(spec, 9);
    REQUIRE(a.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(a[t].coords == b[t].coords);
        CHECK(a[t].features == b[t].features);
        CHECK(*a[t].labels == *b[t].labels);
        CHECK(a[t].frame_index == static_cast<int>(t));
        CHECK(a[t].pose == Pose::Identity());
        CHECK_NOTHROW(a[t].validate());
    }
    CHECK(generate_synthetic_sequence(spec, 10)[0].coords != a[0].coords);

    // Zero velocity: frames differ only by noise.
    SyntheticSceneSpec still = spec;
    still.velocities.assign(static_cast<std::size_t>(still.moving_objects), Vec3::Zero());
    const auto s = generate_synthetic_sequence(still, 3);
    REQUIRE(s[0].size() == s[2].size());
    double worst = 0.0;
    for (std::size_t i = 0; i < s[0].size(); ++i) worst = std::max(worst, (s[0].coords[i] - s[2].coords[i]).norm());
    CHECK(worst < 12.0 * still.noise_sigma);
    CHECK(*s[0].labels == *s[2].labels);

    // One object moving at 1 m/frame along x.
    SyntheticSceneSpec one;
    one.static_objects = 0;
    one.moving_objects = 1;
    one.velocities = {Vec3(1, 0, 0)};
    one.frames = 3;
    const auto m = generate_synthetic_sequence(one, 5);
    for (int t = 1; t < 3; ++t) {
        const Vec3 step = centroid_of(m[t], 2) - centroid_of(m[t - 1], 2);
        CHECK(step.x() == doctest::Approx(1.0).epsilon(0.01));
        CHECK(std::abs(step.y()) < 0.01);
        CHECK(std::abs(step.z()) < 0.01);
    }
    // Ground under the box is occluded, so ground counts change as it moves.
    for (const auto& f : m) {
        const auto& l = *f.labels;
        CHECK(std::count(l.begin(), l.end(), 2) == one.points_per_object);
        CHECK(std::count(l.begin(), l.end(), 0) < one.ground_points);
    }

    SyntheticSceneSpec speeds = spec;
    speeds.scheme = SyntheticScheme::Speeds;
    speeds.velocities = {Vec3(0.5, 0, 0), Vec3(0, 0.9, 0), Vec3(0.2, 0, 0), Vec3(1.0, 0, 0)};
    const auto sp = generate_synthetic_sequence(speeds, 1);
    const auto& l = *sp[0].labels;
    CHECK(std::count(l.begin(), l.end(), 2) == 2 * speeds.points_per_object);
    CHECK(std::count(l.begin(), l.end(), 3) == 2 * speeds.points_per_object);
    CHECK(synthetic_class_map(SyntheticScheme::Speeds).size() == 4);

    SyntheticSceneSpec bad = spec;
    bad.velocities = {Vec3(1, 0, 0)};
    CHECK_THROWS_AS(generate_synthetic_sequence(bad, 1), InvalidInput);
    bad = spec;
    bad.frames = 0;
    CHECK_THROWS_AS(generate_synthetic_sequence(bad, 1), InvalidInput);
}

TEST_CASE("static and moving objects share single-frame statistics") {
    // Pool many scenes; box extents and remission of the two classes should match.
    SyntheticSceneSpec spec;
    spec.frames = 1;
    spec.ground_points = 0;
    double rem[3] = {0, 0, 0};
    double height[3] = {0, 0, 0};
    double count[3] = {0, 0, 0};
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto f = generate_synthetic_sequence(spec, seed)[0];
        for (std::size_t i = 0; i < f.size(); ++i) {
            const int c = (*f.labels)[i];
            rem[c] += f.features(i, 0);
            height[c] += f.coords[i].z();
            count[c] += 1;
        }
    }
    CHECK(count[1] == count[2]);
    CHECK(std::abs(rem[1] / count[1] - rem[2] / count[2]) < 0.01);
    CHECK(std::abs(height[1] / count[1] - height[2] / count[2]) < 0.05);
}

TEST_CASE("sequence directories round trip") {
    const auto dir = fixtures::scratch_dir("seqdir");
    SyntheticSceneSpec spec;
    spec.frames = 3;
    auto frames = generate_synthetic_sequence(spec, 2);
    std::mt19937_64 rng(35);
    for (auto& f : frames) f.pose = fixtures::random_rigid(rng);
    io::write_sequence(dir / "00", frames);
    CHECK(std::filesystem::exists(dir / "00" / "velodyne" / "000002.bin"));
    CHECK(std::filesystem::exists(dir / "00" / "labels" / "000000.label"));
    const auto back = io::read_sequence(dir / "00");
    REQUIRE(back.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(back[t].frame_index == frames[t].frame_index);
        CHECK(*back[t].labels == *frames[t].labels);
        CHECK(back[t].features == frames[t].features);
        CHECK(back[t].pose == frames[t].pose);
        // Coordinates pass through float32 on disk.
        for (std::size_t i = 0; i < back[t].size(); ++i)
            CHECK((back[t].coords[i] - frames[t].coords[i]).norm() < 1e-5);
    }
    const auto mapped = io::read_sequence(dir / "00", [](std::uint32_t raw) { return raw == 2 ? 1 : 0; });
    CHECK(std::count(mapped[0].labels->begin(), mapped[0].labels->end(), 1) ==
          std::count(frames[0].labels->begin(), frames[0].labels->end(), 2));

    io::write_predictions(dir / "pred", 7, {0, 2, 1});
    CHECK(io::read_predictions(dir / "pred" / "000007.label") == std::vector<int>{0, 2, 1});
    CHECK_THROWS_AS(io::read_sequence(dir / "nothing"), IoError);
    std::filesystem::remove(dir / "00" / "labels" / "000001.label");
    CHECK_THROWS_AS(io::read_sequence(dir / "00"), IoError);
}
