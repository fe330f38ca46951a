#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seg4d/adam.hpp"
#include "seg4d/backbone.hpp"
#include "seg4d/checkpoint.hpp"
#include "seg4d/class_map.hpp"
#include "seg4d/evaluate.hpp"
#include "seg4d/frame.hpp"
#include "seg4d/losses.hpp"
#include "seg4d/prediction.hpp"
#include "seg4d/temporal.hpp"

namespace seg4d {

struct Sequence {
    int id = 0;
    std::vector<Frame> frames;
};

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

// Rotation about the z axis by `angle` radians.
Frame rotate_z(const Frame& frame, double angle);

// Same z rotation (angle uniform in [0, rotation_range)) applied to both frames,
// then independent random point dropping on each frame. At least one point
// survives in every frame. Deterministic in `seed`.
std::pair<Frame, Frame> augment_pair(const Frame& current, const Frame& previous, std::uint64_t seed,
                                     double drop_probability, double rotation_range);

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
    int stage = 1;
    std::uint64_t seed = 0;
    double voxel_unit = 0.25;
    Vec3 crop_extent = Vec3::Zero();  // <= 0 along an axis disables cropping
    double drop_probability = 0.2;
    double rotation_range = 6.283185307179586;
    AdamConfig adam;
    int steps = 300;
    int validate_every = 0;  // steps between validation passes; 0 disables
    FocalLossConfig focal;
    BackboneConfig backbone;
    std::size_t tvpr_k = 5;
    std::size_t tvpr_hidden = 16;
    std::filesystem::path log_path;          // empty: no log file
    std::filesystem::path pseudo_cache_dir;  // empty: in-memory cache only

    void validate() const;
};

// ---------------------------------------------------------------------------
// Model bundle and checkpoints
// ---------------------------------------------------------------------------

struct Model {
    BackboneParams<float> backbone;
    std::optional<TvprParams<float>> tvpr;
    ClassMap classes;
    int stage = 0;
    bool single_frame = false;  // stage-1 models run with previous := current
    double voxel_unit = 0.25;

    Checkpoint to_checkpoint() const;
    static Model from_checkpoint(const Checkpoint& ck);

    // FNV-1a over all backbone (non-refiner) parameter bytes.
    std::uint64_t backbone_checksum() const;
    std::uint64_t tvpr_checksum() const;
};

Model make_model(const TrainConfig& cfg, const ClassMap& classes);

// ---------------------------------------------------------------------------
// Training log: one JSON object per line.
// ---------------------------------------------------------------------------

class TrainLog {
public:
    TrainLog();
    explicit TrainLog(const std::filesystem::path& path);
    void step(int stage, std::uint64_t step, double loss, double lr);
    void validation(int stage, std::uint64_t step, double miou);
    const std::vector<double>& losses() const { return losses_; }

private:
    void write(const std::string& line);
    std::ofstream out_;
    std::vector<double> losses_;
    double start_ = 0.0;
};

// ---------------------------------------------------------------------------
// Pseudo-prediction cache for refiner training. Entries are keyed by
// (sequence id, frame index) and carry a pass counter. With a directory every
// put also writes one file per (sequence, frame, pass):
//   seq<S>_frame<T>_pass<P>.bin: u64 point count, u64 class count,
//   float32 probabilities row-major (little-endian).
// ---------------------------------------------------------------------------

class PseudoCache {
public:
    PseudoCache() = default;
    explicit PseudoCache(std::filesystem::path dir);

    // Rebuilds the cache from the latest pass of each file in `dir`.
    static PseudoCache resume(const std::filesystem::path& dir);

    void put(int sequence, int frame, const Matrix<float>& probs);
    bool contains(int sequence, int frame) const { return entries_.count({sequence, frame}) != 0; }
    int passes(int sequence, int frame) const;
    // Throws StructuralError when no entry exists.
    const Matrix<float>& latest(int sequence, int frame) const;

    static void write_file(const std::filesystem::path& path, const Matrix<float>& probs);
    static Matrix<float> read_file(const std::filesystem::path& path);

private:
    std::filesystem::path dir_;
    std::map<std::pair<int, int>, std::pair<int, Matrix<float>>> entries_;
};

// ---------------------------------------------------------------------------
// Forward helpers
// ---------------------------------------------------------------------------

struct PointOutputs {
    Matrix<float> logits;    // per point of the current frame
    Matrix<float> features;  // per point, decoder features
};

// Voxelizes both frames (previous already aligned), runs the backbone and
// copies voxel outputs back to the current frame's points.
PointOutputs backbone_points(const BackboneParams<float>& params, const Frame& current, const Frame& previous,
                             double voxel_unit);

struct InferOptions {
    bool use_refiner = true;
    std::optional<bool> single_frame;  // default: model.single_frame
};

// Temporal recursion over an ordered sequence. Frame 0 is its own previous
// frame; later frames consume the previous frame's refined predictions.
std::vector<PredictionSet> infer_sequence(const std::vector<Frame>& frames, const Model& model,
                                          const InferOptions& opts = {});

// ---------------------------------------------------------------------------
// Training stages
// ---------------------------------------------------------------------------

struct StageResult {
    std::vector<double> losses;
    std::vector<double> validation_miou;
};

// Single-frame pre-training: previous := current.
StageResult train_stage1(Model& model, const std::vector<Sequence>& data, const TrainConfig& cfg,
                         const std::vector<Sequence>* validation = nullptr);

// Multi-frame training of backbone + CFGA + TVI on aligned, augmented pairs.
StageResult train_stage2(Model& model, const std::vector<Sequence>& data, const TrainConfig& cfg,
                         const std::vector<Sequence>* validation = nullptr);

// Previous-frame probabilities fed to the refiner for frame t of `seq` during
// refiner training: frame 0 uses its own prediction, a frame not yet in the
// cache gets one-hot ground truth of frame t-1, and a revisited frame gets the
// latest cached prediction of frame t-1 (StructuralError when missing).
Matrix<float> refiner_previous_input(const PseudoCache& cache, const Sequence& seq, int t,
                                     const Matrix<float>& own_probs, std::size_t classes);

// Refiner-only training with ground-truth bootstrap and pseudo-prediction
// recycling. Backbone parameters stay frozen (checked by checksum).
StageResult train_stage3(Model& model, const std::vector<Sequence>& data, const TrainConfig& cfg,
                         PseudoCache* cache = nullptr);

// Evaluates a model over sequences with infer_sequence.
EvalReport evaluate_model(const Model& model, const std::vector<Sequence>& data, const InferOptions& opts = {});

}  // namespace seg4d
