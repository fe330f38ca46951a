#include "seg4d/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <random>
#include <regex>

namespace seg4d {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

template <typename Params>
std::uint64_t checksum_of(const Params& params) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto* p : params) {
        h = fnv1a64(p->name.data(), p->name.size(), h);
        h = fnv1a64(p->value.data(), p->value.size() * sizeof(float), h);
    }
    return h;
}

void export_params(std::vector<NamedTensor>& out, const std::vector<const Parameter<float>*>& params) {
    for (const auto* p : params) {
        NamedTensor t;
        t.name = p->name;
        t.shape = {p->value.rows(), p->value.cols()};
        t.data = p->value.storage();
        out.push_back(std::move(t));
    }
}

void import_params(const Checkpoint& ck, const std::vector<Parameter<float>*>& params) {
    for (auto* p : params) {
        const NamedTensor* t = ck.find(p->name);
        if (!t) throw StructuralError("checkpoint: missing tensor " + p->name);
        if (t->shape.size() != 2 || t->shape[0] != p->value.rows() || t->shape[1] != p->value.cols()) {
            throw StructuralError("checkpoint: tensor " + p->name + " has an unexpected shape");
        }
        p->value.storage() = t->data;
        p->zero_grad();
    }
}

Frame maybe_crop(const Frame& f, const Vec3& extent) {
    if (extent.x() <= 0.0 && extent.y() <= 0.0 && extent.z() <= 0.0) return f;
    Vec3 e = extent;
    for (int a = 0; a < 3; ++a) {
        if (e[a] <= 0.0) e[a] = std::numeric_limits<double>::infinity();
    }
    Frame out = crop_centered(f, e);
    if (out.size() == 0) {
        throw InvalidInput("frame " + std::to_string(f.frame_index) + " has no points inside the crop box");
    }
    return out;
}

// Previous frame expressed in the current frame's coordinates; frame 0 is its
// own previous frame.
Frame previous_for(const std::vector<Frame>& frames, std::size_t t) {
    if (t == 0) return frames[0];
    return align_to_previous(frames[t], frames[t - 1]);
}

void check_order(const std::vector<Frame>& frames) {
    for (std::size_t t = 1; t < frames.size(); ++t) {
        if (frames[t].frame_index <= frames[t - 1].frame_index) {
            throw InvalidInput("frames out of order: index " + std::to_string(frames[t].frame_index) + " follows " +
                               std::to_string(frames[t - 1].frame_index));
        }
    }
}

void require_labels(const Frame& f, const char* who) {
    if (!f.labels) throw InvalidInput(std::string(who) + ": frame " + std::to_string(f.frame_index) + " has no labels");
}

struct BackboneStep {
    double loss = 0.0;
};

// One supervised step on a (current, previous) pair in voxel space.
BackboneStep backbone_step(Model& model, Adam<float>& adam, const Frame& current, const Frame& previous,
                           const TrainConfig& cfg, std::uint64_t step) {
    const VoxelGrid gc = voxelize(current, cfg.voxel_unit);
    const VoxelGrid gp = voxelize(previous, cfg.voxel_unit);
    const PairGeometry geom = make_pair_geometry(gc, gp, model.backbone.config.tvi);
    BackboneCache<float> cache;
    const BackboneOutput<float> out = backbone_forward(model.backbone, gc, gp, geom, &cache);
    FocalLossConfig focal = cfg.focal;
    if (focal.ignore_ids.empty()) focal.ignore_ids = model.classes.ignore_ids();
    const auto res = focal_loss(out.logits, std::span<const int>(*gc.labels), focal);
    if (!std::isfinite(static_cast<double>(res.loss))) {
        throw NumericalError("training diverged: non-finite loss at step " + std::to_string(step));
    }
    model.backbone.zero_grad();
    if (!res.all_ignored) {
        backbone_backward(model.backbone, cache, res.grad);
        auto params = model.backbone.parameters();
        adam.step(params);
        model.backbone.zero_grad();
    }
    return {static_cast<double>(res.loss)};
}

struct Pick {
    std::size_t seq = 0;
    std::size_t frame = 0;
};

Pick pick_frame(const std::vector<Sequence>& data, std::mt19937_64& rng, bool need_previous) {
    std::uniform_int_distribution<std::size_t> sd(0, data.size() - 1);
    const std::size_t s = sd(rng);
    const std::size_t n = data[s].frames.size();
    if (n == 0) throw InvalidInput("sequence " + std::to_string(data[s].id) + " has no frames");
    const std::size_t lo = (need_previous && n > 1) ? 1 : 0;
    std::uniform_int_distribution<std::size_t> fd(lo, n - 1);
    return {s, fd(rng)};
}

void check_data(const std::vector<Sequence>& data, const char* who) {
    if (data.empty()) throw InvalidInput(std::string(who) + ": no training sequences");
    for (const auto& s : data) {
        if (s.frames.empty()) throw InvalidInput(std::string(who) + ": sequence " + std::to_string(s.id) + " is empty");
        check_order(s.frames);
        for (const auto& f : s.frames) require_labels(f, who);
    }
}

}  // namespace

// ---------------------------------------------------------------------------

Frame rotate_z(const Frame& frame, double angle) {
    Frame out = frame;
    const double c = std::cos(angle), s = std::sin(angle);
    for (auto& p : out.coords) {
        const double x = p.x(), y = p.y();
        p.x() = c * x - s * y;
        p.y() = s * x + c * y;
    }
    return out;
}

std::pair<Frame, Frame> augment_pair(const Frame& current, const Frame& previous, std::uint64_t seed,
                                     double drop_probability, double rotation_range) {
    if (!(drop_probability >= 0.0 && drop_probability < 1.0)) {
        throw InvalidInput("augment: drop probability must lie in [0, 1)");
    }
    if (!(rotation_range >= 0.0)) throw InvalidInput("augment: rotation range must be non-negative");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double angle = u(rng) * rotation_range;
    auto drop = [&](const Frame& f) {
        std::vector<std::size_t> keep;
        keep.reserve(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (u(rng) >= drop_probability) keep.push_back(i);
        }
        if (keep.empty() && f.size() > 0) keep.push_back(0);
        return select_points(rotate_z(f, angle), keep);
    };
    Frame c = drop(current);
    Frame p = drop(previous);
    return {std::move(c), std::move(p)};
}

void TrainConfig::validate() const {
    if (stage < 1 || stage > 3) throw UsageError("train: stage must be 1, 2 or 3");
    if (!(voxel_unit > 0.0) || !std::isfinite(voxel_unit)) throw UsageError("train: voxel unit must be positive");
    if (!(drop_probability >= 0.0 && drop_probability < 1.0)) throw UsageError("train: drop probability not in [0, 1)");
    if (!(rotation_range >= 0.0)) throw UsageError("train: rotation range must be non-negative");
    if (!(adam.lr >= 0.0)) throw UsageError("train: learning rate must be non-negative");
    if (steps < 0) throw UsageError("train: steps must be non-negative");
    if (tvpr_k == 0) throw UsageError("train: refiner k must be at least 1");
    if (tvpr_hidden == 0) throw UsageError("train: refiner hidden width must be at least 1");
    if (backbone.tvi.k == 0) throw UsageError("train: interpolation k must be at least 1");
}

// ---------------------------------------------------------------------------

Checkpoint Model::to_checkpoint() const {
    Checkpoint ck;
    const auto& bc = backbone.config;
    ck.metadata["format"] = "seg4d-model";
    ck.metadata["stage"] = stage;
    ck.metadata["single_frame"] = single_frame;
    ck.metadata["voxel_unit"] = voxel_unit;
    ck.metadata["backbone"] = {{"point_features", bc.point_features},
                               {"encoder_width", bc.encoder_width},
                               {"decoder_width", bc.decoder_width},
                               {"num_classes", bc.num_classes},
                               {"height_scale", bc.height_scale},
                               {"tvi",
                                {{"k", bc.tvi.k}, {"alpha", bc.tvi.alpha}, {"beta", bc.tvi.beta}, {"gamma", bc.tvi.gamma}}}};
    ck.metadata["classes"] = {{"names", classes.names()}, {"ignore", classes.ignore_ids()}};
    export_params(ck.tensors, backbone.parameters());
    if (tvpr) {
        ck.metadata["tvpr"] = {{"k", tvpr->k},
                               {"hidden", tvpr->edge.layers().front().out()},
                               {"features", tvpr->feature_width()},
                               {"classes", tvpr->num_classes()}};
        export_params(ck.tensors, tvpr->parameters());
    } else {
        ck.metadata["tvpr"] = nullptr;
    }
    return ck;
}

Model Model::from_checkpoint(const Checkpoint& ck) {
    const auto& md = ck.metadata;
    if (!md.is_object() || md.value("format", "") != "seg4d-model") {
        throw StructuralError("checkpoint: metadata does not describe a seg4d model");
    }
    try {
        Model m;
        const auto& b = md.at("backbone");
        BackboneConfig bc;
        bc.point_features = b.at("point_features").get<std::size_t>();
        bc.encoder_width = b.at("encoder_width").get<std::size_t>();
        bc.decoder_width = b.at("decoder_width").get<std::size_t>();
        bc.num_classes = b.at("num_classes").get<std::size_t>();
        bc.height_scale = b.at("height_scale").get<double>();
        bc.tvi.k = b.at("tvi").at("k").get<std::size_t>();
        bc.tvi.alpha = b.at("tvi").at("alpha").get<double>();
        bc.tvi.beta = b.at("tvi").at("beta").get<double>();
        bc.tvi.gamma = b.at("tvi").at("gamma").get<double>();
        std::mt19937_64 rng(0);
        m.backbone = BackboneParams<float>::make(bc, rng);
        import_params(ck, m.backbone.parameters());
        m.classes = ClassMap(md.at("classes").at("names").get<std::vector<std::string>>(),
                             md.at("classes").at("ignore").get<std::set<int>>());
        m.stage = md.at("stage").get<int>();
        m.single_frame = md.at("single_frame").get<bool>();
        m.voxel_unit = md.at("voxel_unit").get<double>();
        const auto& t = md.at("tvpr");
        if (!t.is_null()) {
            auto p = TvprParams<float>::make(t.at("classes").get<std::size_t>(), t.at("features").get<std::size_t>(),
                                             t.at("hidden").get<std::size_t>(), t.at("k").get<std::size_t>(), rng);
            import_params(ck, p.parameters());
            m.tvpr = std::move(p);
        }
        if (m.classes.size() != bc.num_classes) throw StructuralError("checkpoint: class map size != classifier width");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("checkpoint: malformed metadata: ") + e.what());
    }
}

std::uint64_t Model::backbone_checksum() const { return checksum_of(backbone.parameters()); }

std::uint64_t Model::tvpr_checksum() const { return tvpr ? checksum_of(tvpr->parameters()) : 0; }

Model make_model(const TrainConfig& cfg, const ClassMap& classes) {
    Model m;
    BackboneConfig bc = cfg.backbone;
    bc.num_classes = classes.size();
    std::mt19937_64 rng(cfg.seed);
    m.backbone = BackboneParams<float>::make(bc, rng);
    m.classes = classes;
    m.voxel_unit = cfg.voxel_unit;
    return m;
}

// ---------------------------------------------------------------------------

TrainLog::TrainLog() : start_(now_seconds()) {}

TrainLog::TrainLog(const std::filesystem::path& path) : start_(now_seconds()) {
    if (!path.empty()) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::app);
        if (!out_) throw IoError("cannot open training log " + path.string());
    }
}

void TrainLog::write(const std::string& line) {
    if (out_.is_open()) {
        out_ << line << '\n';
        out_.flush();
    }
}

void TrainLog::step(int stage, std::uint64_t step, double loss, double lr) {
    losses_.push_back(loss);
    nlohmann::json j = {{"step", step}, {"stage", stage}, {"loss", loss}, {"lr", lr}, {"wall_time", now_seconds() - start_}};
    write(j.dump());
}

void TrainLog::validation(int stage, std::uint64_t step, double miou) {
    nlohmann::json j = {{"step", step}, {"stage", stage}, {"val_miou", miou}, {"wall_time", now_seconds() - start_}};
    write(j.dump());
}

// ---------------------------------------------------------------------------

PseudoCache::PseudoCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

void PseudoCache::write_file(const std::filesystem::path& path, const Matrix<float>& probs) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw IoError("cannot write pseudo prediction " + path.string());
    const std::uint64_t dims[2] = {probs.rows(), probs.cols()};
    bool ok = std::fwrite(dims, sizeof(dims), 1, f) == 1;
    if (probs.size() > 0) ok = ok && std::fwrite(probs.data(), sizeof(float), probs.size(), f) == probs.size();
    ok = (std::fclose(f) == 0) && ok;
    if (!ok) throw IoError("short write to " + path.string());
}

Matrix<float> PseudoCache::read_file(const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) throw IoError("cannot read pseudo prediction " + path.string());
    std::uint64_t dims[2] = {0, 0};
    if (std::fread(dims, sizeof(dims), 1, f) != 1) {
        std::fclose(f);
        throw IoError("truncated pseudo prediction header in " + path.string());
    }
    const auto bytes = std::filesystem::file_size(path);
    if (dims[1] == 0 || bytes != sizeof(dims) + dims[0] * dims[1] * sizeof(float)) {
        std::fclose(f);
        throw IoError("pseudo prediction " + path.string() + " has " + std::to_string(bytes) +
                      " bytes, inconsistent with its header");
    }
    Matrix<float> m(dims[0], dims[1]);
    const bool ok = m.size() == 0 || std::fread(m.data(), sizeof(float), m.size(), f) == m.size();
    std::fclose(f);
    if (!ok) throw IoError("truncated pseudo prediction " + path.string());
    return m;
}

PseudoCache PseudoCache::resume(const std::filesystem::path& dir) {
    PseudoCache c(dir);
    static const std::regex re(R"(seq(\d+)_frame(\d+)_pass(\d+)\.bin)");
    std::map<std::pair<int, int>, std::pair<int, std::filesystem::path>> latest;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = e.path().filename().string();
        if (!std::regex_match(name, m, re)) continue;
        const std::pair<int, int> key{std::stoi(m[1]), std::stoi(m[2])};
        const int pass = std::stoi(m[3]);
        auto it = latest.find(key);
        if (it == latest.end() || it->second.first < pass) latest[key] = {pass, e.path()};
    }
    for (const auto& [key, v] : latest) c.entries_[key] = {v.first, read_file(v.second)};
    return c;
}

void PseudoCache::put(int sequence, int frame, const Matrix<float>& probs) {
    auto& entry = entries_[{sequence, frame}];
    entry.first += 1;
    entry.second = probs;
    if (!dir_.empty()) {
        char name[64];
        std::snprintf(name, sizeof(name), "seq%03d_frame%06d_pass%04d.bin", sequence, frame, entry.first);
        write_file(dir_ / name, probs);
    }
}

int PseudoCache::passes(int sequence, int frame) const {
    auto it = entries_.find({sequence, frame});
    return it == entries_.end() ? 0 : it->second.first;
}

const Matrix<float>& PseudoCache::latest(int sequence, int frame) const {
    auto it = entries_.find({sequence, frame});
    if (it == entries_.end()) {
        throw StructuralError("pseudo cache: no prediction for sequence " + std::to_string(sequence) + " frame " +
                              std::to_string(frame));
    }
    return it->second.second;
}

// ---------------------------------------------------------------------------

PointOutputs backbone_points(const BackboneParams<float>& params, const Frame& current, const Frame& previous,
                             double voxel_unit) {
    const VoxelGrid gc = voxelize(current, voxel_unit);
    const VoxelGrid gp = voxelize(previous, voxel_unit);
    const PairGeometry geom = make_pair_geometry(gc, gp, params.config.tvi);
    const BackboneOutput<float> out = backbone_forward(params, gc, gp, geom);
    return {devoxelize(gc, out.logits), devoxelize(gc, out.features)};
}

std::vector<PredictionSet> infer_sequence(const std::vector<Frame>& frames, const Model& model,
                                          const InferOptions& opts) {
    check_order(frames);
    const bool single = opts.single_frame.value_or(model.single_frame);
    const bool refine = opts.use_refiner && model.tvpr.has_value() && !single;
    std::vector<PredictionSet> preds;
    preds.reserve(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const Frame& cur = frames[t];
        const Frame prev = single ? cur : previous_for(frames, t);
        PointOutputs po = backbone_points(model.backbone, cur, prev, model.voxel_unit);
        if (!refine) {
            preds.push_back(PredictionSet::from_logits(std::move(po.logits), cur.frame_index));
            continue;
        }
        const Matrix<float> probs = softmax(po.logits);
        const Matrix<float>& probs_prev = t == 0 ? probs : preds.back().probs;
        const TemporalGraph graph = build_temporal_graph(cur.coords, prev.coords, model.tvpr->k);
        Matrix<float> refined = tvpr_refine(graph, probs_prev, probs, po.logits, po.features, *model.tvpr);
        preds.push_back(PredictionSet::from_logits(std::move(refined), cur.frame_index));
    }
    return preds;
}

EvalReport evaluate_model(const Model& model, const std::vector<Sequence>& data, const InferOptions& opts) {
    ConfusionMatrix cm(model.classes.size());
    for (const auto& seq : data) {
        const auto preds = infer_sequence(seq.frames, model, opts);
        for (std::size_t t = 0; t < preds.size(); ++t) {
            require_labels(seq.frames[t], "evaluate");
            accumulate(cm, preds[t].classes, *seq.frames[t].labels, model.classes);
        }
    }
    return summarize(cm, model.classes);
}

// ---------------------------------------------------------------------------

namespace {

StageResult train_backbone(Model& model, const std::vector<Sequence>& data, const TrainConfig& cfg,
                           const std::vector<Sequence>* validation, int stage) {
    cfg.validate();
    check_data(data, stage == 1 ? "stage 1" : "stage 2");
    if (model.classes.size() != model.backbone.config.num_classes) {
        throw StructuralError("model class map does not match the classifier width");
    }
    model.voxel_unit = cfg.voxel_unit;
    model.single_frame = stage == 1;
    model.stage = stage;
    TrainLog log(cfg.log_path);
    StageResult result;
    Adam<float> adam(cfg.adam);
    std::mt19937_64 rng(cfg.seed);
    for (int step = 1; step <= cfg.steps; ++step) {
        const Pick pk = pick_frame(data, rng, stage == 2);
        const std::uint64_t aug_seed = rng();
        const auto& frames = data[pk.seq].frames;
        const Frame cur = maybe_crop(frames[pk.frame], cfg.crop_extent);
        BackboneStep st;
        if (stage == 1) {
            auto [a, unused] = augment_pair(cur, cur, aug_seed, cfg.drop_probability, cfg.rotation_range);
            st = backbone_step(model, adam, a, a, cfg, static_cast<std::uint64_t>(step));
        } else {
            const Frame prev = maybe_crop(previous_for(frames, pk.frame), cfg.crop_extent);
            auto [a, b] = augment_pair(cur, prev, aug_seed, cfg.drop_probability, cfg.rotation_range);
            st = backbone_step(model, adam, a, b, cfg, static_cast<std::uint64_t>(step));
        }
        log.step(stage, static_cast<std::uint64_t>(step), st.loss, cfg.adam.lr);
        if (validation && cfg.validate_every > 0 && step % cfg.validate_every == 0) {
            const double miou = evaluate_model(model, *validation, {false, stage == 1}).miou;
            result.validation_miou.push_back(miou);
            log.validation(stage, static_cast<std::uint64_t>(step), miou);
        }
    }
    result.losses = log.losses();
    return result;
}

}  // namespace

StageResult train_stage1(Model& model, const std::vector<Sequence>& data, const TrainConfig& cfg,
                         const std::vector<Sequence>* validation) {
    return train_backbone(model, data, cfg, validation, 1);
}

StageResult train_stage2(Model& model, const std::vector<Sequence>& data, const TrainConfig& cfg,
                         const std::vector<Sequence>* validation) {
    return train_backbone(model, data, cfg, validation, 2);
}

Matrix<float> refiner_previous_input(const PseudoCache& cache, const Sequence& seq, int t,
                                     const Matrix<float>& own_probs, std::size_t classes) {
    if (t < 0 || static_cast<std::size_t>(t) >= seq.frames.size()) {
        throw InvalidInput("refiner input: frame " + std::to_string(t) + " outside sequence " +
                           std::to_string(seq.id));
    }
    if (t == 0) return own_probs;
    if (!cache.contains(seq.id, t)) {
        require_labels(seq.frames[t - 1], "stage 3");
        return PredictionSet::one_hot(*seq.frames[t - 1].labels, classes, t - 1).probs;
    }
    return cache.latest(seq.id, t - 1);
}

StageResult train_stage3(Model& model, const std::vector<Sequence>& data, const TrainConfig& cfg, PseudoCache* cache) {
    cfg.validate();
    check_data(data, "stage 3");
    const std::size_t classes = model.classes.size();
    if (!model.tvpr) {
        std::mt19937_64 init_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        model.tvpr = TvprParams<float>::make(classes, model.backbone.config.decoder_width, cfg.tvpr_hidden, cfg.tvpr_k,
                                             init_rng);
    }
    TvprParams<float>& tp = *model.tvpr;
    if (tp.num_classes() != classes || tp.feature_width() != model.backbone.config.decoder_width) {
        throw StructuralError("stage 3: refiner shape does not match the backbone");
    }
    const std::uint64_t frozen = model.backbone_checksum();

    // Frozen backbone outputs and graphs, computed once.
    struct Item {
        std::size_t seq = 0, frame = 0;
        PointOutputs out;
        Matrix<float> probs;
        TemporalGraph graph;
    };
    std::vector<Item> items;
    for (std::size_t s = 0; s < data.size(); ++s) {
        const auto& frames = data[s].frames;
        for (std::size_t t = 0; t < frames.size(); ++t) {
            Item it;
            it.seq = s;
            it.frame = t;
            const Frame prev = previous_for(frames, t);
            it.out = backbone_points(model.backbone, frames[t], prev, model.voxel_unit);
            it.probs = softmax(it.out.logits);
            it.graph = build_temporal_graph(frames[t].coords, prev.coords, tp.k);
            items.push_back(std::move(it));
        }
    }
    PseudoCache local(cfg.pseudo_cache_dir);
    PseudoCache& pc = cache ? *cache : local;
    TrainLog log(cfg.log_path);
    Adam<float> adam(cfg.adam);
    std::mt19937_64 rng(cfg.seed);
    FocalLossConfig focal = cfg.focal;
    if (focal.ignore_ids.empty()) focal.ignore_ids = model.classes.ignore_ids();

    std::vector<std::size_t> order(items.size());
    std::size_t cursor = order.size();
    for (int step = 1; step <= cfg.steps; ++step) {
        if (cursor == order.size()) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        const Item& it = items[order[cursor++]];
        const Sequence& seq = data[it.seq];
        const int t = static_cast<int>(it.frame);

        const Matrix<float> prev_probs = refiner_previous_input(pc, seq, t, it.probs, classes);

        TvprCache<float> tc;
        const Matrix<float> refined = tvpr_refine(it.graph, prev_probs, it.probs, it.out.logits, it.out.features, tp, &tc);
        const auto res = focal_loss(refined, std::span<const int>(*seq.frames[t].labels), focal);
        if (!std::isfinite(static_cast<double>(res.loss))) {
            throw NumericalError("stage 3 diverged: non-finite loss at step " + std::to_string(step));
        }
        tp.zero_grad();
        if (!res.all_ignored) {
            tvpr_backward(tp, tc, res.grad);
            auto params = tp.parameters();
            adam.step(params);
            tp.zero_grad();
        }
        pc.put(seq.id, t, softmax(refined));
        log.step(3, static_cast<std::uint64_t>(step), static_cast<double>(res.loss), cfg.adam.lr);
    }

    if (model.backbone_checksum() != frozen) throw StructuralError("stage 3: backbone parameters changed");
    for (const auto* p : model.backbone.parameters()) {
        for (float g : p->grad.storage()) {
            if (g != 0.0f) throw StructuralError("stage 3: gradient reached frozen parameter " + p->name);
        }
    }
    model.stage = 3;
    model.single_frame = false;
    StageResult result;
    result.losses = log.losses();
    return result;
}

}  // namespace seg4d
