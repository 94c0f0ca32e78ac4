#pragma once

#include <cstdint>
#include <vector>

#include "superflow/geometry.hpp"
#include "superflow/rng.hpp"
#include "superflow/synth.hpp"

namespace superflow {

/// Rows whose pre-normalization norm falls at or below this are emitted as
/// zeros and flagged invalid instead of being divided by ~0.
inline constexpr double kNormEps = 1e-12;

/// Two-layer relu MLP mapping per-point inputs to backbone features.
struct PointEncoderParams {
    Matrix w1;  // hidden x in
    Vector b1;
    Matrix w2;  // out x hidden
    Vector b2;

    Eigen::Index in_dim() const { return w1.cols(); }
    Eigen::Index out_dim() const { return w2.rows(); }
};

struct PointEncoderGrads {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
};

struct EncoderCache {
    Matrix input;   // N x in
    Matrix hidden;  // N x hidden, post-relu
};

PointEncoderParams init_point_encoder(Eigen::Index in_dim, Eigen::Index hidden_dim,
                                      Eigen::Index out_dim, Rng& rng);

/// Returns N x out features; fills `cache` when non-null.
Matrix encoder_forward(const PointEncoderParams& params, const Matrix& input,
                       EncoderCache* cache = nullptr);

PointEncoderGrads encoder_backward(const PointEncoderParams& params, const EncoderCache& cache,
                                   const Matrix& d_output);

/// Frozen per-class embedding table standing in for a pretrained image
/// backbone: pixels of class c all carry row c.
class ImageFeatureProvider {
  public:
    ImageFeatureProvider(int num_classes, Eigen::Index dim, std::uint64_t seed);
    explicit ImageFeatureProvider(Matrix table) : table_(std::move(table)) {}

    const Matrix& table() const { return table_; }
    Eigen::Index dim() const { return table_.cols(); }
    int num_classes() const { return static_cast<int>(table_.rows()); }
    Vector feature(std::uint16_t class_id) const;

  private:
    Matrix table_;
};

/// Embeds every pixel: row = table row of the pixel's class, zero for sky.
/// Throws on class ids outside the table.
Matrix image_features(const ImageFeatureProvider& provider, const SemanticImage& image);

/// Bias-free linear map followed by row-wise l2 normalization.
struct HeadParams {
    Matrix weight;  // out x in
};

struct HeadCache {
    Matrix input;                      // N x in
    Matrix output;                     // N x out, unit rows where valid
    Vector norms;                      // pre-normalization row norms
    std::vector<std::uint8_t> valid;   // zero where the row was degenerate
};

struct HeadGrads {
    Matrix weight;
    Matrix input;
};

HeadParams init_head(Eigen::Index out_dim, Eigen::Index in_dim, Rng& rng);

Matrix head_forward(const HeadParams& params, const Matrix& input, HeadCache* cache = nullptr);

HeadGrads head_backward(const HeadParams& params, const HeadCache& cache, const Matrix& d_output);

/// Mean of member rows per group, renormalized to unit length. Groups with
/// no members or a degenerate mean are zero rows with valid[g] == 0.
struct PooledFeatures {
    Matrix features;                  // G x dim
    std::vector<std::uint8_t> valid;  // G
};

struct PoolCache {
    Matrix pooled;                    // normalized, G x dim
    Vector norms;                     // pre-normalization mean norms
    std::vector<std::int32_t> counts;
    std::vector<std::uint8_t> valid;
};

/// `ids` maps each row of `rows` to a group in [0, num_groups); negatives
/// are skipped.
PooledFeatures pool_super(const Matrix& rows, const std::vector<std::int32_t>& ids,
                          std::int32_t num_groups, PoolCache* cache = nullptr);

/// Propagates group-level gradients back to member rows.
Matrix pool_backward(const PoolCache& cache, const std::vector<std::int32_t>& ids,
                     Eigen::Index num_rows, const Matrix& d_pooled);

}  // namespace superflow
