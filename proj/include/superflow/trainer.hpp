#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "superflow/encoder.hpp"
#include "superflow/geometry.hpp"
#include "superflow/superpix.hpp"
#include "superflow/synth.hpp"

namespace superflow {

// Adaptive-moment update constants; decay applies to weight matrices only.
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;
inline constexpr double kWeightDecay = 0.01;

// One-cycle schedule shape.
inline constexpr double kWarmupFraction = 0.3;
inline constexpr double kInitialDiv = 25.0;
inline constexpr double kFinalDiv = 1e4;

struct TrainConfig {
    std::uint64_t seed = 0;
    std::uint64_t steps = 100;
    std::uint64_t scenes_per_epoch = 0;  // 0 = sample from every scene
    double dt = 0.5;
    int num_sweeps = 2;
    double tau = 0.07;
    double w_sc = 1.0;
    double w_tc = 1.0;
    double w_d2s = 1.0;
    double base_lr = 1e-2;
    bool enable_vc = true;
    bool enable_d2s = true;
    bool enable_fcl = true;
    int hidden_dim = 32;
    int point_dim = 16;
    int embed_dim = 16;
    int head_dim = 8;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainerModel {
    PointEncoderParams encoder;  // theta_p
    HeadParams head_point;       // omega_p
    HeadParams head_image;       // omega_i
    Matrix image_table;          // frozen theta_i, num_classes x embed_dim
};

struct OptimizerState {
    Matrix m_w1, v_w1;
    Vector m_b1, v_b1;
    Matrix m_w2, v_w2;
    Vector m_b2, v_b2;
    Matrix m_head_point, v_head_point;
    Matrix m_head_image, v_head_image;
    std::uint64_t t = 0;  // completed updates
};

struct StepRecord {
    std::uint64_t step = 0;
    double lr = 0.0;
    double l_sc = 0.0;
    double l_tc = 0.0;
    double l_d2s = 0.0;
    double total = 0.0;
    bool skipped = false;
};

struct Checkpoint {
    TrainConfig config;
    std::uint64_t step = 0;  // next step to run
    TrainerModel model;
    OptimizerState opt;
    std::vector<StepRecord> history;
};

/// Everything the loop needs to rebuild frame triples deterministically.
struct PretrainData {
    std::vector<SceneSpec> scene_specs;
    LidarSpec lidar;
    std::vector<CameraCalibration> rig;
    std::vector<double> keyframe_times;  // candidate center timestamps
    int num_classes = kDefaultNumClasses;
    int feat_channels = 1;
};

/// Linear warmup from base/25 over the first 30% of steps, cosine decay to
/// base/1e4 over the rest. Requires step < total.
double one_cycle_lr(std::uint64_t step, std::uint64_t total, double base);

Checkpoint init_trainer(const TrainConfig& config, int num_classes, int feat_channels = 1);

/// Frame triple reduced to the tensors a step consumes; produced once and
/// reusable across steps that revisit the same (scene, center).
struct PreparedFrame {
    Matrix input;                        // N x (3 + C), coords then channels
    std::vector<std::int32_t> point_ids;
    SuperpixelSet id_space;              // pixel grids dropped, id metadata kept
};

struct PreparedTriple {
    std::array<PreparedFrame, 3> frames;  // t - dt, t, t + dt
    Matrix dense_input;                   // center dense cloud
    std::vector<std::int32_t> dense_ids;
};

PreparedTriple prepare_triple(const TrainConfig& config, const std::vector<FrameBundle>& triple);

/// One optimization step on a prepared triple. Appends to history; a triple
/// with no active region anywhere is recorded as skipped and leaves model
/// and optimizer untouched.
StepRecord train_step_prepared(Checkpoint& state, const PreparedTriple& triple);

/// Full step from raw bundles: superpixels, superpoints, dense branch, losses, update.
StepRecord train_step(Checkpoint& state, const std::vector<FrameBundle>& triple);

/// Runs (or resumes) the loop: scene and center for step k are drawn from an
/// rng seeded by (seed, k), so a resumed run retraces the original exactly.
Checkpoint run_pretraining(const TrainConfig& config, const PretrainData& data,
                           const Checkpoint* resume = nullptr);

}  // namespace superflow
