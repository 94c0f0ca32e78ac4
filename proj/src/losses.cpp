#include "superflow/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace superflow {

LossGrad d2s_loss(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("d2s operands must match in shape");
    LossGrad out;
    out.d_a = Matrix::Zero(a.rows(), a.cols());
    out.d_b = Matrix::Zero(b.rows(), b.cols());
    if (a.rows() == 0) return out;
    const double inv = 1.0 / static_cast<double>(a.rows());
    out.value = inv * (static_cast<double>(a.rows()) - a.cwiseProduct(b).sum());
    out.d_a = -inv * b;
    out.d_b = -inv * a;
    return out;
}

LossGrad info_nce(const Matrix& q, const Matrix& k, double tau) {
    if (q.rows() != k.rows() || q.cols() != k.cols())
        throw std::invalid_argument("info_nce operands must match in shape");
    if (tau <= 0.0) throw std::invalid_argument("temperature must be positive");
    LossGrad out;
    out.d_a = Matrix::Zero(q.rows(), q.cols());
    out.d_b = Matrix::Zero(k.rows(), k.cols());
    const Eigen::Index v = q.rows();
    if (v == 0) return out;

    Matrix logits = (q * k.transpose()) / tau;  // v x v
    Matrix probs(v, v);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < v; ++i) {
        const double row_max = logits.row(i).maxCoeff();
        const Eigen::ArrayXd shifted = logits.row(i).transpose().array() - row_max;
        const Eigen::ArrayXd exps = shifted.exp();
        const double denom = exps.sum();
        probs.row(i) = (exps / denom).matrix().transpose();
        loss -= shifted[i] - std::log(denom);
    }
    out.value = loss / static_cast<double>(v);

    // dL/dlogits = (probs - I) / v; chain through logits = q k^T / tau.
    Matrix d_logits = probs;
    d_logits.diagonal().array() -= 1.0;
    d_logits /= static_cast<double>(v) * tau;
    out.d_a = d_logits * k;
    out.d_b = d_logits.transpose() * q;
    return out;
}

LossGrad spatial_contrastive(const Matrix& point_feats, const Matrix& image_feats, double tau) {
    return info_nce(point_feats, image_feats, tau);
}

TemporalLossGrad temporal_contrastive(const Matrix& center_vs_prev, const Matrix& prev,
                                      const Matrix& center_vs_next, const Matrix& next,
                                      double tau) {
    const LossGrad backward = info_nce(center_vs_prev, prev, tau);
    const LossGrad forward = info_nce(center_vs_next, next, tau);
    TemporalLossGrad out;
    out.value = 0.5 * (backward.value + forward.value);
    out.d_center_prev = 0.5 * backward.d_a;
    out.d_prev = 0.5 * backward.d_b;
    out.d_center_next = 0.5 * forward.d_a;
    out.d_next = 0.5 * forward.d_b;
    return out;
}

}  // namespace superflow
