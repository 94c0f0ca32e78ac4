#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "superflow/encoder.hpp"
#include "superflow/geometry.hpp"
#include "superflow/synth.hpp"

namespace superflow {

/// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
  public:
    explicit ConfusionMatrix(int num_classes);

    void add(std::uint16_t truth, std::uint16_t prediction);
    void merge(const ConfusionMatrix& other);
    std::uint64_t at(int truth, int prediction) const;
    std::uint64_t total() const;
    int num_classes() const { return num_classes_; }

  private:
    int num_classes_ = 0;
    std::vector<std::uint64_t> counts_;  // row-major
};

struct IouSummary {
    std::vector<double> iou;              // zero where undefined
    std::vector<std::uint8_t> defined;    // zero-denominator classes excluded
    double miou = 0.0;                    // mean over defined classes
};

/// IoU_i = TP / (TP + FP + FN); classes with zero denominator are flagged
/// undefined and left out of the mean.
IouSummary iou_from_confusion(const ConfusionMatrix& cm);

struct ProbeOptions {
    int steps = 500;
    double lr = 0.1;
    Eigen::Index max_train_points = 20000;
    Eigen::Index max_eval_points = 20000;
};

/// Softmax regression on frozen backbone features, fitted from zero init by
/// full-batch gradient descent — no randomness anywhere.
struct ProbeModel {
    Matrix weights;  // num_classes x feature dim
    Vector bias;
    std::vector<std::uint8_t> train_support;  // classes seen while fitting
};

struct ProbeResult {
    ProbeModel model;
    IouSummary scores;
};

ProbeModel fit_probe(const PointEncoderParams& encoder, const std::vector<PointCloud>& train,
                     int num_classes, const ProbeOptions& options = {});

/// Confusion-based scoring on held-out clouds; classes the probe never saw
/// in training are marked undefined regardless of their eval counts.
IouSummary evaluate_probe(const PointEncoderParams& encoder, const ProbeModel& probe,
                          const std::vector<PointCloud>& eval_clouds, int num_classes,
                          const ProbeOptions& options = {});

ProbeResult linear_probe(const PointEncoderParams& encoder, const std::vector<PointCloud>& train,
                         const std::vector<PointCloud>& eval_clouds, int num_classes,
                         const ProbeOptions& options = {});

struct CeRr {
    double ce = 0.0;
    double rr = 0.0;
    bool ce_defined = true;  // false when the baseline is perfect
    bool rr_defined = true;  // false when the clean score is zero
};

/// CE = sum(1 - s_i) / sum(1 - b_i), RR = sum(s_i) / (3 * clean).
CeRr ce_rr(const std::array<double, 3>& model_scores,
           const std::array<double, 3>& baseline_scores, double clean_miou);

inline constexpr std::array<double, 3> kBeamDropSeverities = {0.25, 0.5, 0.75};

/// Drops round(fraction * num_beams) whole elevation rings, chosen by the
/// seeded shuffle; ring membership is recovered from point elevations.
PointCloud corrupt_beam_missing(const PointCloud& cloud, double drop_fraction,
                                const LidarSpec& lidar, std::uint64_t seed);

}  // namespace superflow
