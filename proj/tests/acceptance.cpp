// Acceptance run: one PASS/FAIL line per criterion, printed as a summary at
// the end. Progress goes to stderr while the long runs are going.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "seg4d/losses.hpp"
#include "seg4d/pipeline.hpp"
#include "seg4d/synthetic.hpp"
#include "support/fixtures.hpp"
#include "support/gradients.hpp"
#include "support/oracles.hpp"

using namespace seg4d;

namespace {

struct Outcome {
    int id = 0;
    std::string name;
    bool pass = false;
    bool gating = true;
    std::string detail;
};

std::vector<Outcome> outcomes;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void record(int id, std::string name, bool pass, std::string detail, bool gating = true) {
    std::fprintf(stderr, "  criterion %d %s: %s\n", id, pass ? "pass" : "FAIL", detail.c_str());
    outcomes.push_back({id, std::move(name), pass, gating, std::move(detail)});
}

template <typename F>
void guarded(int id, const std::string& name, F&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        record(id, name, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void randomize(std::vector<Parameter<double>*> params, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    for (auto* p : params)
        for (auto& v : p->value.storage()) v = n(rng);
}

Matrix<double> random_probs(std::mt19937_64& rng, std::size_t n, std::size_t c) {
    return softmax(gradtest::random_matrix(rng, n, c, 1.5));
}

// ---------------------------------------------------------------------------

void oracle_equivalence() {
    constexpr int kCases = 100;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<std::size_t> size(1, 60);
    std::vector<std::string> parts;
    bool ok = true;
    auto report = [&](const char* op, double worst, double tol) {
        ok = ok && worst <= tol;
        std::ostringstream s;
        s << op << " " << kCases << " cases worst " << worst << (worst <= tol ? " <= " : " > ") << tol;
        parts.push_back(s.str());
    };

    // Pairwise distances: mixed scales, real-valued and integer coordinates.
    double worst = 0.0;
    const double gammas[] = {1.0, 4.0, 128.0};
    for (int c = 0; c < kCases; ++c) {
        const bool cells = c % 2 == 0;
        const std::size_t n = size(rng), m = size(rng);
        const auto cur = cells ? fixtures::random_cells(rng, n, -40, 40) : fixtures::random_points(rng, n, -300, 300);
        const auto prev = cells ? fixtures::random_cells(rng, m, -40, 40) : fixtures::random_points(rng, m, -300, 300);
        const double g = gammas[c % 3];
        const auto d = cross_frame_distances(cur, prev, g);
        const auto ref = oracle::pairwise(cur, prev, g);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) worst = std::max(worst, std::abs(d.values(i, j) - ref[i][j]));
    }
    report("cross_frame_distances", worst, 1e-6);

    // kNN: dense selection and the grid index against a full sort. An index
    // mismatch counts as an infinite error.
    worst = 0.0;
    for (int c = 0; c < kCases; ++c) {
        const bool cells = c % 2 == 0;
        const std::size_t n = size(rng), m = size(rng), k = 1 + c % 7;
        const auto cur = cells ? fixtures::random_cells(rng, n, -5, 5) : fixtures::random_points(rng, n, -3, 3);
        const auto prev = cells ? fixtures::random_cells(rng, m, -5, 5) : fixtures::random_points(rng, m, -3, 3);
        const auto ref = oracle::knn(oracle::pairwise(cur, prev, 4.0), k);
        const auto dense = knn_previous(cross_frame_distances(cur, prev, 4.0), k);
        const auto grid = knn_previous_grid(cur, prev, 4.0, k);
        for (std::size_t i = 0; i < n; ++i) {
            if (dense.count[i] != ref[i].size() || grid.count[i] != ref[i].size()) worst = INFINITY;
            for (std::size_t j = 0; j < ref[i].size() && std::isfinite(worst); ++j) {
                if (dense.index[dense.slot(i, j)] != ref[i][j].second || grid.index[grid.slot(i, j)] != ref[i][j].second)
                    worst = INFINITY;
                else
                    worst = std::max({worst, std::abs(dense.distance[dense.slot(i, j)] - ref[i][j].first),
                                      std::abs(grid.distance[grid.slot(i, j)] - ref[i][j].first)});
            }
        }
    }
    report("knn_previous", worst, 1e-6);

    worst = 0.0;
    for (int c = 0; c < kCases; ++c) {
        const TviConfig cfg{1 + static_cast<std::size_t>(c % 6), 0.5, 2.0, c % 2 ? 4.0 : 2.0};
        const std::size_t width = 1 + c % 5, out = 1 + (c / 5) % 4;
        const auto cur = fixtures::random_cells(rng, size(rng), -3, 3);
        const auto prev = fixtures::random_cells(rng, size(rng), -3, 3);
        Mlp<double> mlp("tvi", {2 * width, 6, out}, {Activation::Relu, Activation::Relu});
        mlp.init(rng);
        randomize(mlp.parameters(), rng, 0.5);
        const auto fp = gradtest::random_matrix(rng, prev.size(), width);
        const auto fc = gradtest::random_matrix(rng, cur.size(), width);
        const auto nb = interpolation_weights(knn_previous_grid(cur, prev, cfg.gamma, cfg.k), cfg.alpha, cfg.beta);
        const auto h = tvi_forward(nb, fp, fc, mlp);
        worst = std::max(worst, oracle::max_abs_diff(h, oracle::tvi(cur, prev, oracle::to_mat(fp), oracle::to_mat(fc),
                                                                    mlp, cfg)));
    }
    report("tvi_forward", worst, 1e-6);

    worst = 0.0;
    for (int c = 0; c < kCases; ++c) {
        const std::size_t k = 1 + c % 6;
        const auto cur = fixtures::random_points(rng, size(rng), -4, 4);
        const auto prev = fixtures::random_points(rng, size(rng), -4, 4);
        const auto g = build_temporal_graph(cur, prev, k);
        const auto ref = oracle::temporal_graph(cur, prev, k);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            if (g.count[i] != ref[i].size()) worst = INFINITY;
            for (std::size_t j = 0; j < ref[i].size() && std::isfinite(worst); ++j) {
                const auto s = g.slot(i, j);
                if (g.index[s] != ref[i][j].prev) {
                    worst = INFINITY;
                    break;
                }
                worst = std::max({worst, (g.relpos[s] - ref[i][j].relpos).cwiseAbs().maxCoeff(),
                                  (g.offset[s] - ref[i][j].offset).cwiseAbs().maxCoeff(),
                                  std::abs(g.sq_distance[s] - ref[i][j].sq_distance)});
            }
        }
    }
    report("build_temporal_graph", worst, 1e-6);

    worst = 0.0;
    for (int c = 0; c < kCases; ++c) {
        const std::size_t C = 2 + c % 4, F = 2 + c % 5, k = 1 + c % 5;
        const auto cur = fixtures::random_points(rng, size(rng), -2, 2);
        const auto prev = fixtures::random_points(rng, size(rng), -2, 2);
        const auto graph = build_temporal_graph(cur, prev, k);
        const auto yp = random_probs(rng, prev.size(), C);
        const auto logits = gradtest::random_matrix(rng, cur.size(), C);
        const auto yc = softmax(logits);
        const auto feats = gradtest::random_matrix(rng, cur.size(), F);
        auto p = TvprParams<double>::make(C, F, 8, k, rng);
        randomize(p.parameters(), rng, 0.5);
        const auto got = tvpr_refine(graph, yp, yc, logits, feats, p);
        worst = std::max(worst, oracle::max_abs_diff(got, oracle::tvpr(cur, prev, oracle::to_mat(yp), oracle::to_mat(yc),
                                                                       oracle::to_mat(logits), oracle::to_mat(feats), p)));
    }
    report("tvpr_refine", worst, 1e-6);

    // The backbone contains the sparse conv; checked in double against the
    // loop oracle at the tighter 1e-6 bound, and in float at 1e-5.
    worst = 0.0;
    double worst_float = 0.0;
    for (int c = 0; c < kCases; ++c) {
        BackboneConfig bc;
        bc.encoder_width = 3 + c % 4;
        bc.decoder_width = 3 + c % 3;
        bc.num_classes = 2 + c % 3;
        bc.tvi.gamma = c % 2 ? 4.0 : 2.0;
        auto p = BackboneParams<double>::make(bc, rng);
        randomize(p.parameters(), rng, 0.4);
        const Frame cur = fixtures::random_frame(rng, 20 + size(rng), 0.8);
        const Frame prev = fixtures::random_frame(rng, 20 + size(rng), 0.8);
        const VoxelGrid gc = voxelize(cur, 0.25), gp = voxelize(prev, 0.25);
        const auto geom = make_pair_geometry(gc, gp, bc.tvi);
        const auto ref = oracle::backbone(p, gc, gp);
        const auto got = backbone_forward(p, gc, gp, geom);
        worst = std::max({worst, oracle::max_abs_diff(got.logits, ref.logits),
                          oracle::max_abs_diff(got.features, ref.features)});
        const auto gotf = backbone_forward(p.cast<float>(), gc, gp, geom);
        worst_float = std::max(worst_float, oracle::max_abs_diff(gotf.logits, ref.logits));
    }
    report("backbone_forward", worst, 1e-6);
    report("backbone_forward(float)", worst_float, 1e-5);

    const double secs = seconds_since(t0);
    ok = ok && secs < 120.0;
    std::string detail;
    for (const auto& s : parts) detail += s + "; ";
    detail += fmt("%.1f s (limit 120 s)", secs);
    record(1, "oracle equivalence", ok, detail);
}

// ---------------------------------------------------------------------------

void gradient_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    GradCheckReport all;
    std::size_t seeds_ok = 0;
    constexpr int kSeeds = 10;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        std::mt19937_64 rng(7000 + seed);
        BackboneConfig bc;
        bc.encoder_width = 4;
        bc.decoder_width = 4;
        bc.num_classes = 3;
        bc.tvi.gamma = 4.0;
        auto bp = BackboneParams<double>::make(bc, rng);
        auto tp = TvprParams<double>::make(3, 4, 5, 3, rng);
        randomize(bp.parameters(), rng, 0.5);
        randomize(tp.parameters(), rng, 0.5);
        const Frame cur = fixtures::random_frame(rng, 40, 0.6);
        const Frame prev = fixtures::random_frame(rng, 35, 0.6);
        const VoxelGrid gc = voxelize(cur, 0.25), gp = voxelize(prev, 0.25);
        const auto geom = make_pair_geometry(gc, gp, bc.tvi);
        const auto graph = build_temporal_graph(cur.coords, prev.coords, 3);
        auto yp = softmax(gradtest::random_matrix(rng, prev.size(), 3, 1.5));
        const std::vector<int>& targets = *cur.labels;

        auto loss = [&] {
            const auto out = backbone_forward(bp, gc, gp, geom);
            const auto lp = devoxelize(gc, out.logits);
            const auto fp = devoxelize(gc, out.features);
            return focal_loss(tvpr_refine(graph, yp, softmax(lp), lp, fp, tp, nullptr, false),
                              std::span<const int>(targets), {})
                .loss;
        };
        BackboneCache<double> bcache;
        TvprCache<double> tcache;
        const auto out = backbone_forward(bp, gc, gp, geom, &bcache);
        const auto lp = devoxelize(gc, out.logits);
        const auto fp = devoxelize(gc, out.features);
        const auto probs = softmax(lp);
        const auto fl = focal_loss(tvpr_refine(graph, yp, probs, lp, fp, tp, &tcache, false),
                                   std::span<const int>(targets), {});
        bp.zero_grad();
        tp.zero_grad();
        const auto tg = tvpr_backward(tp, tcache, fl.grad);
        Matrix<double> d_lp = tg.d_logits;
        add_inplace(d_lp, softmax_backward(probs, tg.d_probs_current));
        backbone_backward(bp, bcache, devoxelize_backward(gc, d_lp), devoxelize_backward(gc, tg.d_features));

        GradCheckReport rep = gradtest::check_parameters(bp.parameters(), loss, rng, 25, true);
        merge(rep, gradtest::check_parameters(tp.parameters(), loss, rng, 25, true));
        merge(rep, gradtest::check_matrix(yp, tg.d_probs_previous, loss, rng, 30, true));
        seeds_ok += rep.ok() ? 1 : 0;
        merge(all, rep);
    }
    const double secs = seconds_since(t0);
    const bool kinks_ok = all.kinks * 50 <= all.checked;
    std::ostringstream s;
    s << seeds_ok << "/" << kSeeds << " seeds clean, " << all.checked << " entries, " << all.failures
      << " failures, worst rel " << all.max_rel_error << " (tol 1e-4, h 1e-5), " << all.kinks
      << " kink re-probes (cap 2%); " << fmt("%.1f s (limit 300 s)", secs);
    record(2, "gradient suite", seeds_ok == kSeeds && all.failures == 0 && kinks_ok && secs < 300.0, s.str());
}

// ---------------------------------------------------------------------------

bool identity_random_inputs(std::string& detail) {
    std::mt19937_64 rng(3003);
    std::uniform_int_distribution<std::size_t> size(1, 80);
    std::normal_distribution<float> wide(0.0f, 30.0f);
    int equal = 0;
    constexpr int kCases = 100;
    for (int c = 0; c < kCases; ++c) {
        const std::size_t C = 2 + c % 24, F = 1 + c % 16, k = 1 + c % 6;
        const auto cur = fixtures::random_points(rng, size(rng), -20, 20);
        const auto prev = fixtures::random_points(rng, size(rng), -20, 20);
        const auto graph = build_temporal_graph(cur, prev, k);
        Matrix<float> logits(cur.size(), C), feats(cur.size(), F), lprev(prev.size(), C);
        for (auto& v : logits.storage()) v = wide(rng);
        for (auto& v : feats.storage()) v = wide(rng);
        for (auto& v : lprev.storage()) v = wide(rng);
        auto p = TvprParams<float>::make(C, F, 4 + c % 30, k, rng);
        const auto refined = tvpr_refine(graph, softmax(lprev), softmax(logits), logits, feats, p);
        equal += refined == logits ? 1 : 0;
    }
    detail = std::to_string(equal) + "/" + std::to_string(kCases) + " random inputs refine to identical logits";
    return equal == kCases;
}

// ---------------------------------------------------------------------------

struct OrderingRun {
    double base = 0, tvi = 0, tvpr = 0;
    bool identity_miou = false;
    bool frozen = false;
    double secs = 0;
};

OrderingRun ordering_seed(std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    SyntheticSceneSpec spec;
    std::vector<Sequence> train, eval;
    spec.frames = 20;
    for (int i = 0; i < 10; ++i) train.push_back({i, generate_synthetic_sequence(spec, seed * 1000 + i)});
    spec.frames = 10;
    for (int i = 0; i < 5; ++i) eval.push_back({100 + i, generate_synthetic_sequence(spec, seed * 1000 + 500 + i)});

    TrainConfig cfg;
    cfg.seed = seed;
    cfg.backbone.tvi.gamma = 4.0;
    cfg.adam.lr = 3e-3;
    Model m = make_model(cfg, synthetic_class_map());
    const int moving = m.classes.id_of("moving-object");
    if (moving < 0) throw StructuralError("synthetic class map has no moving class");
    const auto mv = static_cast<std::size_t>(moving);

    OrderingRun r;
    cfg.stage = 1;
    cfg.steps = 200;
    train_stage1(m, train, cfg);
    r.base = evaluate_model(m, eval).iou[mv];
    cfg.stage = 2;
    cfg.steps = 200;
    train_stage2(m, train, cfg);
    const auto stage2 = evaluate_model(m, eval);
    r.tvi = stage2.iou[mv];

    Model idle = m;
    TrainConfig c0 = cfg;
    c0.stage = 3;
    c0.steps = 0;
    train_stage3(idle, train, c0);
    r.identity_miou = evaluate_model(idle, eval).miou == stage2.miou;

    const auto before = m.backbone_checksum();
    cfg.stage = 3;
    cfg.steps = 1000;
    train_stage3(m, train, cfg);
    r.frozen = m.backbone_checksum() == before && m.tvpr_checksum() != idle.tvpr_checksum();
    r.tvpr = evaluate_model(m, eval).iou[mv];
    r.secs = seconds_since(t0);
    std::fprintf(stderr, "  seed %llu: moving IoU backbone %.3f, +TVI %.3f, +TVPR %.3f (%.0f s)\n",
                 static_cast<unsigned long long>(seed), r.base, r.tvi, r.tvpr, r.secs);
    return r;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void ordering_identity_freeze() {
    std::string id_detail;
    const bool id_random = identity_random_inputs(id_detail);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> base, tvi, tvpr;
    int identity_ok = 0, frozen_ok = 0;
    constexpr int kSeeds = 5;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        const auto r = ordering_seed(seed);
        base.push_back(r.base);
        tvi.push_back(r.tvi);
        tvpr.push_back(r.tvpr);
        identity_ok += r.identity_miou ? 1 : 0;
        frozen_ok += r.frozen ? 1 : 0;
    }
    const double secs = seconds_since(t0);
    const double mb = median(base), mt = median(tvi), mr = median(tvpr);
    std::ostringstream s;
    s.precision(4);
    s << "median moving IoU over " << kSeeds << " seeds: backbone " << mb << ", +TVI " << mt << " (" << std::showpos
      << mt - mb << "), +TVPR " << mr << " (" << mr - mt << std::noshowpos << "); required margin 0.02 each; "
      << fmt("%.0f s (limit 3600 s)", secs);
    record(5, "ordering backbone < +TVI < +TVPR", mt - mb >= 0.02 && mr - mt >= 0.02 && secs <= 3600.0, s.str());

    record(3, "identity at init", id_random && identity_ok == kSeeds,
           id_detail + "; stage 3 at 0 steps reproduces the stage-2 mIoU exactly on " + std::to_string(identity_ok) +
               "/" + std::to_string(kSeeds) + " seeds");
    record(6, "stage-3 freeze", frozen_ok == kSeeds,
           "backbone checksum unchanged by 1000 stage-3 steps (refiner changed) on " + std::to_string(frozen_ok) + "/" +
               std::to_string(kSeeds) + " seeds");
}

// ---------------------------------------------------------------------------

void weight_table() {
    const double w0 = interpolation_weight(0.0, 0.5, 2.0), w25 = interpolation_weight(0.25, 0.5, 2.0);
    bool beyond = true;
    for (double d : {0.5, 0.5000001, 0.75, 1.0, 10.0, 1e9}) beyond = beyond && interpolation_weight(d, 0.5, 2.0) == 0.0;
    std::ostringstream s;
    s << "w(0)=" << w0 << ", w(0.25)=" << w25 << ", w(d>=0.5)=0 " << (beyond ? "holds" : "violated");
    record(4, "weight table", w0 == 1.0 && w25 == 0.5 && beyond, s.str());
}

void parameter_budget() {
    std::mt19937_64 rng(4);
    const auto count = TvprParams<float>::make(25, 96, 128, 5, rng).parameter_count();
    const double rel = (static_cast<double>(count) - 33000.0) / 33000.0;
    record(7, "refiner parameter budget", std::abs(rel) <= 0.2,
           std::to_string(count) + " parameters at C=25, F=96, H=128 (" + fmt("%+.1f%%", 100.0 * rel) +
               " vs 33k, limit +-20%)");
}

// ---------------------------------------------------------------------------

void determinism() {
    SyntheticSceneSpec spec;
    spec.static_objects = 2;
    spec.moving_objects = 2;
    spec.frames = 5;
    spec.points_per_object = 100;
    spec.ground_points = 500;
    spec.half_extent = 8.0;
    std::vector<Sequence> data;
    for (int i = 0; i < 2; ++i) data.push_back({i, generate_synthetic_sequence(spec, 90 + i)});

    struct Run {
        std::vector<std::vector<std::uint8_t>> checkpoints;
        std::vector<PredictionSet> preds;
    };
    auto once = [&] {
        TrainConfig cfg;
        cfg.seed = 17;
        cfg.backbone.tvi.gamma = 4.0;
        cfg.adam.lr = 3e-3;
        cfg.steps = 40;
        Run r;
        Model m = make_model(cfg, synthetic_class_map());
        cfg.stage = 1;
        train_stage1(m, data, cfg);
        r.checkpoints.push_back(m.to_checkpoint().serialize());
        cfg.stage = 2;
        train_stage2(m, data, cfg);
        r.checkpoints.push_back(m.to_checkpoint().serialize());
        cfg.stage = 3;
        train_stage3(m, data, cfg);
        r.checkpoints.push_back(m.to_checkpoint().serialize());
        for (const auto& seq : data)
            for (auto& p : infer_sequence(seq.frames, m)) r.preds.push_back(std::move(p));
        return r;
    };
    const Run a = once(), b = once();
    bool ck = a.checkpoints == b.checkpoints, pr = a.preds.size() == b.preds.size();
    for (std::size_t i = 0; pr && i < a.preds.size(); ++i) {
        const auto& x = a.preds[i].logits.storage();
        const auto& y = b.preds[i].logits.storage();
        pr = a.preds[i].classes == b.preds[i].classes && x.size() == y.size() &&
             std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0;
    }
    std::size_t bytes = 0;
    for (const auto& c : a.checkpoints) bytes += c.size();
    record(9, "determinism", ck && pr,
           std::string("stage 1-3 checkpoints (") + std::to_string(bytes) + " bytes) " + (ck ? "identical" : "differ") +
               ", predictions for " + std::to_string(a.preds.size()) + " frames " + (pr ? "bit-identical" : "differ"));
}

// ---------------------------------------------------------------------------

void refine_speed() {
    constexpr std::size_t n = 200000, k = 5, C = 25, F = 96, H = 128;
    constexpr int kWarmup = 1, kRuns = 5;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> xy(-50.0, 50.0), z(-2.0, 3.0);
    std::normal_distribution<double> jitter(0.0, 0.05);
    std::vector<Vec3> cur(n), prev(n);
    for (std::size_t i = 0; i < n; ++i) {
        prev[i] = Vec3(xy(rng), xy(rng), z(rng));
        cur[i] = prev[i] + Vec3(jitter(rng), jitter(rng), jitter(rng));
    }
    std::normal_distribution<float> nf(0.0f, 1.0f);
    Matrix<float> logits(n, C), feats(n, F), lprev(n, C);
    for (auto& v : logits.storage()) v = nf(rng);
    for (auto& v : lprev.storage()) v = nf(rng);
    for (auto& v : feats.storage()) v = nf(rng);
    const auto probs = softmax(logits), probs_prev = softmax(lprev);
    auto p = TvprParams<float>::make(C, F, H, k, rng);
    for (auto* q : p.parameters())
        for (auto& v : q->value.storage()) v = 0.05f * nf(rng);
    const auto graph = build_temporal_graph(cur, prev, k);

    std::vector<double> ms;
    for (int r = 0; r < kWarmup + kRuns; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        (void)tvpr_refine(graph, probs_prev, probs, logits, feats, p);
        if (r >= kWarmup) ms.push_back(1000.0 * seconds_since(t0));
    }
    const double med = median(ms);
    record(8, "refinement speed (informational)", med < 500.0,
           fmt("median %.0f ms", med) + " over " + std::to_string(kRuns) +
               " runs, 200k points, k=5, C=25, F=96, H=128 (target 500 ms; non-gating)",
           false);
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    guarded(4, "weight table", weight_table);
    guarded(7, "refiner parameter budget", parameter_budget);
    guarded(1, "oracle equivalence", oracle_equivalence);
    guarded(2, "gradient suite", gradient_suite);
    guarded(9, "determinism", determinism);
    guarded(5, "ordering backbone < +TVI < +TVPR", ordering_identity_freeze);
    guarded(8, "refinement speed (informational)", refine_speed);

    std::sort(outcomes.begin(), outcomes.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
    bool gate = true;
    std::printf("\nacceptance summary\n");
    for (const auto& o : outcomes) {
        const char* tag = o.pass ? "PASS" : (o.gating ? "FAIL" : "FAIL (non-gating)");
        std::printf("[%s] %d %s: %s\n", tag, o.id, o.name.c_str(), o.detail.c_str());
        if (o.gating && !o.pass) gate = false;
    }
    std::printf("total %.0f s\n", seconds_since(t0));
    return gate ? 0 : 1;
}
