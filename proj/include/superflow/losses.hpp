#pragma once

#include "superflow/geometry.hpp"

namespace superflow {

/// Value plus gradients with respect to the two gathered feature blocks.
/// Rows of `a`/`b` are pre-matched pairs of unit-norm features.
struct LossGrad {
    double value = 0.0;
    Matrix d_a;
    Matrix d_b;
};

/// Mean cosine disagreement (1 - <a_i, b_i>) over paired rows.
LossGrad d2s_loss(const Matrix& a, const Matrix& b);

/// InfoNCE with anchors `q`, positives `k_i`, negatives all other rows of
/// `k`. Returns 0 with zero grads for fewer than one pair.
LossGrad info_nce(const Matrix& q, const Matrix& k, double tau);

/// Spatial contrastive objective: point-branch anchors against image-branch
/// keys at matching regions.
LossGrad spatial_contrastive(const Matrix& point_feats, const Matrix& image_feats, double tau);

struct TemporalLossGrad {
    double value = 0.0;
    Matrix d_center_prev;  // grads for center rows gathered against t - dt
    Matrix d_prev;
    Matrix d_center_next;  // grads for center rows gathered against t + dt
    Matrix d_next;
};

/// Average of the two directional InfoNCE terms anchored at the center
/// frame; the pair sets against the two neighbors may differ.
TemporalLossGrad temporal_contrastive(const Matrix& center_vs_prev, const Matrix& prev,
                                      const Matrix& center_vs_next, const Matrix& next,
                                      double tau);

}  // namespace superflow
