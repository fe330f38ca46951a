#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "seg4d/kitti_io.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string output;  // stdout and stderr interleaved
};

RunResult run(const std::string& args, const fs::path& cwd) {
    const std::string cmd = "cd '" + cwd.string() + "' && '" SEG4D_CLI_PATH "' " + args + " 2>&1";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), got);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("seg4d_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::size_t count_files(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file() ? 1 : 0;
    return n;
}

}  // namespace

TEST_CASE("gen writes scans, labels and poses") {
    const fs::path dir = scratch_dir("gen");
    write_file(dir / "g.cfg", "frames = 3\ngen_sequences = 2\nground_points = 200\npoints_per_object = 40\n");
    const auto r = run("--seed 3 --config g.cfg --out data gen", dir);
    INFO(r.output);
    REQUIRE(r.code == 0);
    for (const char* seq : {"00", "01"}) {
        const fs::path s = dir / "data" / "sequences" / seq;
        CHECK(count_files(s / "velodyne") == 3);
        CHECK(count_files(s / "labels") == 3);
        CHECK(fs::exists(s / "poses.txt"));
        const auto frames = seg4d::io::read_sequence(s);
        REQUIRE(frames.size() == 3);
        CHECK(frames[0].labels.has_value());
    }
}

TEST_CASE("eval of ground truth against itself is perfect") {
    const fs::path dir = scratch_dir("eval");
    write_file(dir / "g.cfg", "frames = 2\nground_points = 150\npoints_per_object = 30\n");
    REQUIRE(run("--config g.cfg --out data gen", dir).code == 0);
    fs::create_directories(dir / "pred" / "sequences" / "00");
    fs::copy(dir / "data" / "sequences" / "00" / "labels", dir / "pred" / "sequences" / "00" / "predictions");
    const auto r = run("--out report eval --data data --pred pred", dir);
    INFO(r.output);
    REQUIRE(r.code == 0);
    CHECK(r.output.find("mIoU,1.000000") != std::string::npos);
    CHECK(fs::exists(dir / "report" / "eval.csv"));

    fs::remove(dir / "pred" / "sequences" / "00" / "predictions" / "000001.label");
    const auto missing = run("eval --data data --pred pred", dir);
    CHECK(missing.code == 1);
    CHECK(missing.output.find("error: io_error:") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
    const fs::path dir = scratch_dir("usage");
    auto r = run("", dir);
    CHECK(r.code == 2);
    r = run("train --stage 9", dir);
    CHECK(r.code == 2);
    CHECK(r.output.find("error: usage_error:") != std::string::npos);
    write_file(dir / "bad.cfg", "nonsense_key = 1\n");
    r = run("--config bad.cfg bench", dir);
    CHECK(r.code == 2);
    CHECK(r.output.find("unknown key") != std::string::npos);
    r = run("--config missing.cfg bench", dir);
    CHECK(r.code != 0);
    r = run("--help", dir);
    CHECK(r.code == 0);
}

TEST_CASE("train, infer and eval run end to end") {
    const fs::path dir = scratch_dir("e2e");
    write_file(dir / "g.cfg", "frames = 3\nground_points = 150\npoints_per_object = 30\n");
    REQUIRE(run("--config g.cfg --out data gen", dir).code == 0);
    write_file(dir / "t.cfg", "steps = 5\nencoder_width = 8\ndecoder_width = 8\ntvpr_hidden = 8\n");
    auto r = run("--config t.cfg --out s1 train --stage 1 --data data", dir);
    INFO(r.output);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "s1" / "model.ckpt"));
    CHECK(fs::exists(dir / "s1" / "train.log"));
    r = run("--config t.cfg --out s3 train --stage 3 --data data", dir);
    CHECK(r.code == 2);  // stage 3 needs a starting model
    r = run("--config t.cfg --out s3 train --stage 3 --data data --model s1/model.ckpt", dir);
    REQUIRE(r.code == 0);
    r = run("--out pred infer --data data --model s3/model.ckpt", dir);
    REQUIRE(r.code == 0);
    CHECK(count_files(dir / "pred" / "sequences" / "00" / "predictions") == 3);
    r = run("eval --data data --pred pred", dir);
    REQUIRE(r.code == 0);
    CHECK(r.output.find("mIoU,") != std::string::npos);
}

TEST_CASE("bench prints a CSV table") {
    const fs::path dir = scratch_dir("bench");
    write_file(dir / "b.cfg", "bench_points = 500\nbench_runs = 2\nbench_warmup = 0\nbench_hidden = 16\n");
    const auto r = run("--config b.cfg bench", dir);
    INFO(r.output);
    REQUIRE(r.code == 0);
    CHECK(r.output.find("name,points,k,median_ms,min_ms,runs,points_per_s") != std::string::npos);
    CHECK(r.output.find("tvpr_refine,500,5,") != std::string::npos);
    CHECK(r.output.find("knn_grid,500,5,") != std::string::npos);
}
