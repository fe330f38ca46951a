// Command-line front end: gen / train / infer / eval / bench.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "seg4d/config.hpp"
#include "seg4d/errors.hpp"
#include "seg4d/geometry.hpp"
#include "seg4d/kitti_io.hpp"
#include "seg4d/pipeline.hpp"
#include "seg4d/synthetic.hpp"

namespace fs = std::filesystem;
using namespace seg4d;

namespace {

const std::set<std::string> kKnownKeys = {
    // data
    "data", "classes", "train_sequences", "val_sequences", "sequences",
    // gen
    "gen_sequences", "frames", "static_objects", "moving_objects", "points_per_object", "ground_points", "noise_sigma",
    "half_extent", "speed_min", "speed_max", "fast_speed_threshold", "velocities", "scheme",
    // train
    "voxel_unit", "steps", "lr", "drop_probability", "rotation_range", "crop_extent", "validate_every", "focal_gamma",
    "encoder_width", "decoder_width", "height_scale", "tvi_k", "tvi_alpha", "tvi_beta", "tvi_gamma", "tvpr_k",
    "tvpr_hidden",
    // bench
    "bench_points", "bench_k", "bench_runs", "bench_warmup", "bench_classes", "bench_features", "bench_hidden"};

struct Globals {
    std::uint64_t seed = 0;
    std::string config_path;
    std::string out = ".";
    KeyValueConfig cfg;
};

std::vector<int> parse_ids(const std::vector<double>& v) {
    std::vector<int> ids;
    for (double d : v) {
        if (d < 0 || d != static_cast<int>(d)) throw UsageError("sequence ids must be non-negative integers");
        ids.push_back(static_cast<int>(d));
    }
    return ids;
}

ClassMap class_map_for(const std::string& name) {
    if (name == "synthetic") return synthetic_class_map();
    if (name == "synthetic-speeds") return synthetic_class_map(SyntheticScheme::Speeds);
    if (name == "semantic-kitti") return semantic_kitti_multiscan_class_map();
    throw UsageError("unknown class map '" + name + "' (synthetic, synthetic-speeds, semantic-kitti)");
}

std::function<int(std::uint32_t)> label_mapper(const std::string& name) {
    if (name == "semantic-kitti") return [](std::uint32_t raw) { return semantic_kitti_learning_map(raw); };
    return {};
}

std::string seq_name(int id) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d", id);
    return buf;
}

// All numeric sequence directories under <root>/sequences.
std::vector<int> discover_sequences(const fs::path& root) {
    std::vector<int> ids;
    const fs::path dir = root / "sequences";
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_directory()) continue;
        const std::string n = e.path().filename().string();
        if (!n.empty() && std::all_of(n.begin(), n.end(), ::isdigit)) ids.push_back(std::stoi(n));
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<Sequence> load_sequences(const fs::path& root, const std::vector<int>& ids, const std::string& classes) {
    std::vector<Sequence> out;
    const auto map = label_mapper(classes);
    for (int id : ids) out.push_back({id, io::read_sequence(root / "sequences" / seq_name(id), map)});
    return out;
}

fs::path data_root(const Globals& g, const std::string& flag) {
    const std::string d = flag.empty() ? g.cfg.get_string("data", "") : flag;
    if (d.empty()) throw UsageError("no dataset given (--data or 'data' key)");
    return d;
}

std::vector<int> pick_ids(const Globals& g, const std::string& key, const fs::path& root) {
    if (g.cfg.has(key)) return parse_ids(g.cfg.get_doubles(key, {}));
    return discover_sequences(root);
}

// ---------------------------------------------------------------------------

void run_gen(const Globals& g) {
    const auto& c = g.cfg;
    SyntheticSceneSpec spec;
    spec.frames = static_cast<int>(c.get_int("frames", spec.frames));
    spec.static_objects = static_cast<int>(c.get_int("static_objects", spec.static_objects));
    spec.moving_objects = static_cast<int>(c.get_int("moving_objects", spec.moving_objects));
    spec.points_per_object = static_cast<int>(c.get_int("points_per_object", spec.points_per_object));
    spec.ground_points = static_cast<int>(c.get_int("ground_points", spec.ground_points));
    spec.noise_sigma = c.get_double("noise_sigma", spec.noise_sigma);
    spec.half_extent = c.get_double("half_extent", spec.half_extent);
    spec.speed_min = c.get_double("speed_min", spec.speed_min);
    spec.speed_max = c.get_double("speed_max", spec.speed_max);
    spec.fast_speed_threshold = c.get_double("fast_speed_threshold", spec.fast_speed_threshold);
    const auto vel = c.get_doubles("velocities", {});
    if (vel.size() % 3 != 0) throw UsageError("'velocities' needs x,y,z triples");
    for (std::size_t i = 0; i < vel.size(); i += 3) spec.velocities.emplace_back(vel[i], vel[i + 1], vel[i + 2]);
    const std::string scheme = c.get_string("scheme", "static-moving");
    if (scheme == "speeds") spec.scheme = SyntheticScheme::Speeds;
    else if (scheme != "static-moving") throw UsageError("unknown scheme '" + scheme + "'");
    try {
        spec.validate();
    } catch (const InvalidInput& e) {
        throw UsageError(e.what());
    }
    const int count = static_cast<int>(c.get_int("gen_sequences", 1));
    if (count < 1) throw UsageError("gen_sequences must be at least 1");
    for (int s = 0; s < count; ++s) {
        const auto frames = generate_synthetic_sequence(spec, g.seed * 1000 + static_cast<std::uint64_t>(s));
        io::write_sequence(fs::path(g.out) / "sequences" / seq_name(s), frames);
    }
    std::cout << "wrote " << count << " sequence(s) of " << spec.frames << " frame(s) to "
              << (fs::path(g.out) / "sequences").string() << "\n";
}

TrainConfig train_config(const Globals& g, int stage) {
    const auto& c = g.cfg;
    TrainConfig t;
    t.stage = stage;
    t.seed = g.seed;
    t.voxel_unit = c.get_double("voxel_unit", t.voxel_unit);
    t.steps = static_cast<int>(c.get_int("steps", t.steps));
    t.adam.lr = c.get_double("lr", t.adam.lr);
    t.drop_probability = c.get_double("drop_probability", t.drop_probability);
    t.rotation_range = c.get_double("rotation_range", t.rotation_range);
    const auto crop = c.get_doubles("crop_extent", {0, 0, 0});
    if (crop.size() != 3) throw UsageError("'crop_extent' needs three numbers");
    t.crop_extent = Vec3(crop[0], crop[1], crop[2]);
    t.validate_every = static_cast<int>(c.get_int("validate_every", 0));
    t.focal.gamma = c.get_double("focal_gamma", t.focal.gamma);
    t.backbone.encoder_width = static_cast<std::size_t>(c.get_int("encoder_width", 16));
    t.backbone.decoder_width = static_cast<std::size_t>(c.get_int("decoder_width", 16));
    t.backbone.height_scale = c.get_double("height_scale", t.backbone.height_scale);
    t.backbone.tvi.k = static_cast<std::size_t>(c.get_int("tvi_k", 5));
    t.backbone.tvi.alpha = c.get_double("tvi_alpha", t.backbone.tvi.alpha);
    t.backbone.tvi.beta = c.get_double("tvi_beta", t.backbone.tvi.beta);
    t.backbone.tvi.gamma = c.get_double("tvi_gamma", t.backbone.tvi.gamma);
    t.tvpr_k = static_cast<std::size_t>(c.get_int("tvpr_k", 5));
    t.tvpr_hidden = static_cast<std::size_t>(c.get_int("tvpr_hidden", 16));
    t.log_path = fs::path(g.out) / "train.log";
    t.validate();
    return t;
}

void run_train(const Globals& g, int stage, const std::string& data_flag, const std::string& model_flag, bool resume) {
    TrainConfig t = train_config(g, stage);
    const std::string classes = g.cfg.get_string("classes", "synthetic");
    const ClassMap cm = class_map_for(classes);
    const fs::path root = data_root(g, data_flag);
    const auto train = load_sequences(root, pick_ids(g, "train_sequences", root), classes);
    std::optional<std::vector<Sequence>> val;
    if (g.cfg.has("val_sequences")) val = load_sequences(root, parse_ids(g.cfg.get_doubles("val_sequences", {})), classes);

    Model model;
    if (!model_flag.empty()) {
        model = Model::from_checkpoint(Checkpoint::load(model_flag));
        if (model.classes != cm) throw UsageError("checkpoint class map differs from '" + classes + "'");
    } else if (stage == 3) {
        throw UsageError("stage 3 needs a trained backbone (--model)");
    } else {
        model = make_model(t, cm);
    }
    fs::create_directories(g.out);
    StageResult res;
    if (stage == 1) {
        res = train_stage1(model, train, t, val ? &*val : nullptr);
    } else if (stage == 2) {
        res = train_stage2(model, train, t, val ? &*val : nullptr);
    } else {
        const fs::path pdir = fs::path(g.out) / "pseudo";
        if (!resume) fs::remove_all(pdir);
        t.pseudo_cache_dir = pdir;
        PseudoCache cache = resume && fs::exists(pdir) ? PseudoCache::resume(pdir) : PseudoCache(pdir);
        res = train_stage3(model, train, t, &cache);
    }
    const fs::path ck = fs::path(g.out) / "model.ckpt";
    model.to_checkpoint().save(ck);
    std::cout << "stage " << stage << ": " << res.losses.size() << " steps";
    if (!res.losses.empty()) std::cout << ", last loss " << res.losses.back();
    if (!res.validation_miou.empty()) std::cout << ", last val mIoU " << res.validation_miou.back();
    std::cout << ", checkpoint " << ck.string() << "\n";
}

void run_infer(const Globals& g, const std::string& data_flag, const std::string& model_flag, bool no_refiner) {
    if (model_flag.empty()) throw UsageError("infer needs --model");
    const Model model = Model::from_checkpoint(Checkpoint::load(model_flag));
    const fs::path root = data_root(g, data_flag);
    const std::vector<int> ids = pick_ids(g, "sequences", root);
    std::size_t frames = 0;
    for (int id : ids) {
        // Labels are not needed for inference.
        std::vector<Frame> seq = io::read_sequence(root / "sequences" / seq_name(id), [](std::uint32_t) { return 0; });
        const auto preds = infer_sequence(seq, model, {!no_refiner, std::nullopt});
        const fs::path dir = fs::path(g.out) / "sequences" / seq_name(id) / "predictions";
        for (const auto& p : preds) io::write_predictions(dir, p.frame_index, p.classes);
        frames += preds.size();
    }
    std::cout << "predicted " << frames << " frame(s) in " << ids.size() << " sequence(s)\n";
}

void run_eval(const Globals& g, const std::string& data_flag, const std::string& pred_flag) {
    if (pred_flag.empty()) throw UsageError("eval needs --pred");
    const std::string classes = g.cfg.get_string("classes", "synthetic");
    const ClassMap cm = class_map_for(classes);
    const fs::path root = data_root(g, data_flag);
    const fs::path pred_root = pred_flag;
    const std::vector<int> ids = pick_ids(g, "sequences", root);
    ConfusionMatrix conf(cm.size());
    for (int id : ids) {
        const auto frames = io::read_sequence(root / "sequences" / seq_name(id), label_mapper(classes));
        for (const auto& f : frames) {
            if (!f.labels) throw IoError("sequence " + seq_name(id) + " has no labels");
            const fs::path file =
                pred_root / "sequences" / seq_name(id) / "predictions" / (io::frame_file_stem(f.frame_index) + ".label");
            if (!fs::exists(file)) throw IoError("missing prediction " + file.string());
            accumulate(conf, io::read_predictions(file), *f.labels, cm);
        }
    }
    const std::string csv = summarize(conf, cm).to_csv(cm);
    std::cout << csv;
    if (!g.out.empty() && g.out != ".") {
        fs::create_directories(g.out);
        std::ofstream(fs::path(g.out) / "eval.csv") << csv;
    }
}

template <typename F>
std::pair<double, double> time_ms(F&& fn, int warmup, int runs) {
    for (int i = 0; i < warmup; ++i) fn();
    std::vector<double> ms;
    for (int i = 0; i < runs; ++i) {
        const auto a = std::chrono::steady_clock::now();
        fn();
        const auto b = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(b - a).count());
    }
    std::sort(ms.begin(), ms.end());
    const double median = runs % 2 ? ms[runs / 2] : 0.5 * (ms[runs / 2 - 1] + ms[runs / 2]);
    return {median, ms.front()};
}

void run_bench(const Globals& g) {
    const auto& c = g.cfg;
    const auto n = static_cast<std::size_t>(c.get_int("bench_points", 200000));
    const auto k = static_cast<std::size_t>(c.get_int("bench_k", 5));
    const int runs = static_cast<int>(c.get_int("bench_runs", 20));
    const int warmup = static_cast<int>(c.get_int("bench_warmup", 3));
    const auto classes = static_cast<std::size_t>(c.get_int("bench_classes", 25));
    const auto feats = static_cast<std::size_t>(c.get_int("bench_features", 96));
    const auto hidden = static_cast<std::size_t>(c.get_int("bench_hidden", 128));
    if (n == 0 || k == 0 || runs < 1 || warmup < 0 || classes == 0 || feats == 0 || hidden == 0) {
        throw UsageError("bench settings must be positive");
    }

    std::mt19937_64 rng(g.seed);
    std::uniform_real_distribution<double> xy(-50.0, 50.0), z(-2.0, 3.0);
    std::normal_distribution<double> jitter(0.0, 0.05);
    std::vector<Vec3> cur(n), prev(n);
    for (std::size_t i = 0; i < n; ++i) {
        prev[i] = Vec3(xy(rng), xy(rng), z(rng));
        cur[i] = prev[i] + Vec3(jitter(rng), jitter(rng), jitter(rng));
    }
    std::normal_distribution<float> nf(0.0f, 1.0f);
    Matrix<float> logits(n, classes), features(n, feats), logits_prev(n, classes);
    for (auto& v : logits.storage()) v = nf(rng);
    for (auto& v : logits_prev.storage()) v = nf(rng);
    for (auto& v : features.storage()) v = nf(rng);
    const Matrix<float> probs = softmax(logits), probs_prev = softmax(logits_prev);
    auto params = TvprParams<float>::make(classes, feats, hidden, k, rng);
    for (auto* p : params.parameters())
        for (auto& v : p->value.storage()) v = 0.05f * nf(rng);

    TemporalGraph graph;
    const auto graph_t = time_ms([&] { graph = build_temporal_graph(cur, prev, k); }, warmup, runs);
    const auto refine_t = time_ms([&] { (void)tvpr_refine(graph, probs_prev, probs, logits, features, params); }, warmup, runs);

    // TVI-style neighbour search on integer cells at the same point count.
    std::vector<Vec3> cells_cur(n), cells_prev(n);
    for (std::size_t i = 0; i < n; ++i) {
        cells_cur[i] = (cur[i] / 0.25).array().floor();
        cells_prev[i] = (prev[i] / 0.25).array().floor();
    }
    const auto knn_t = time_ms([&] { (void)knn_previous_grid(cells_cur, cells_prev, 128.0, k); }, warmup, runs);

    std::cout << "name,points,k,median_ms,min_ms,runs,points_per_s\n";
    auto row = [&](const char* name, std::pair<double, double> t) {
        std::printf("%s,%zu,%zu,%.3f,%.3f,%d,%.0f\n", name, n, k, t.first, t.second, runs,
                    static_cast<double>(n) / (t.first / 1000.0));
    };
    row("tvpr_refine", refine_t);
    row("temporal_graph", graph_t);
    row("knn_grid", knn_t);
    std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal voxel segmentation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--config", g.config_path, "Key-value configuration file");
    app.add_option("--out", g.out, "Output directory");

    auto* gen = app.add_subcommand("gen", "Write synthetic sequences");

    auto* train = app.add_subcommand("train", "Run one training stage");
    int stage = 0;
    std::string data_flag, model_flag, pred_flag;
    bool resume = false, no_refiner = false;
    train->add_option("--stage", stage, "Training stage")->required()->check(CLI::Range(1, 3));
    train->add_option("--data", data_flag, "Dataset root");
    train->add_option("--model", model_flag, "Checkpoint to continue from");
    train->add_flag("--resume", resume, "Resume the stage-3 pseudo cache in <out>/pseudo");

    auto* infer = app.add_subcommand("infer", "Predict labels for sequences");
    infer->add_option("--data", data_flag, "Dataset root");
    infer->add_option("--model", model_flag, "Checkpoint")->required();
    infer->add_flag("--no-refiner", no_refiner, "Skip the temporal refiner");

    auto* eval = app.add_subcommand("eval", "Score predictions against labels");
    eval->add_option("--data", data_flag, "Dataset root with labels");
    eval->add_option("--pred", pred_flag, "Prediction root")->required();

    auto* bench = app.add_subcommand("bench", "Time refinement and neighbour search");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage_error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (!g.config_path.empty()) {
            g.cfg = KeyValueConfig::load(g.config_path);
            g.cfg.require_known(kKnownKeys);
        }
        if (gen->parsed()) run_gen(g);
        else if (train->parsed()) run_train(g, stage, data_flag, model_flag, resume);
        else if (infer->parsed()) run_infer(g, data_flag, model_flag, no_refiner);
        else if (eval->parsed()) run_eval(g, data_flag, pred_flag);
        else if (bench->parsed()) run_bench(g);
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << e.kind() << ": " << msg << "\n";
        return dynamic_cast<const UsageError*>(&e) ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal_error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
