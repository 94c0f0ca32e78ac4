#include "superflow/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace superflow {

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    return m;
}

}  // namespace

PointEncoderParams init_point_encoder(Eigen::Index in_dim, Eigen::Index hidden_dim,
                                      Eigen::Index out_dim, Rng& rng) {
    if (in_dim < 1 || hidden_dim < 1 || out_dim < 1)
        throw std::invalid_argument("encoder dims must be positive");
    PointEncoderParams params;
    params.w1 = random_matrix(hidden_dim, in_dim, std::sqrt(2.0 / in_dim), rng);
    params.b1 = Vector::Zero(hidden_dim);
    params.w2 = random_matrix(out_dim, hidden_dim, std::sqrt(2.0 / hidden_dim), rng);
    params.b2 = Vector::Zero(out_dim);
    return params;
}

Matrix encoder_forward(const PointEncoderParams& params, const Matrix& input,
                       EncoderCache* cache) {
    if (input.cols() != params.in_dim())
        throw std::invalid_argument("encoder input width mismatch");
    Matrix hidden = input * params.w1.transpose();
    hidden.rowwise() += params.b1.transpose();
    hidden = hidden.cwiseMax(0.0);
    Matrix out = hidden * params.w2.transpose();
    out.rowwise() += params.b2.transpose();
    if (cache) {
        cache->input = input;
        cache->hidden = hidden;
    }
    return out;
}

PointEncoderGrads encoder_backward(const PointEncoderParams& params, const EncoderCache& cache,
                                   const Matrix& d_output) {
    PointEncoderGrads grads;
    grads.w2 = d_output.transpose() * cache.hidden;
    grads.b2 = d_output.colwise().sum().transpose();
    Matrix d_hidden = d_output * params.w2;
    d_hidden = d_hidden.cwiseProduct((cache.hidden.array() > 0.0).cast<double>().matrix());
    grads.w1 = d_hidden.transpose() * cache.input;
    grads.b1 = d_hidden.colwise().sum().transpose();
    return grads;
}

ImageFeatureProvider::ImageFeatureProvider(int num_classes, Eigen::Index dim,
                                           std::uint64_t seed) {
    if (num_classes < 1 || dim < 1) throw std::invalid_argument("bad embedding shape");
    Rng rng(mix_seed(seed, 0x1fa6e));
    table_ = random_matrix(num_classes, dim, 1.0, rng);
    for (Eigen::Index r = 0; r < table_.rows(); ++r) {
        const double norm = table_.row(r).norm();
        if (norm > kNormEps) table_.row(r) /= norm;
    }
}

Vector ImageFeatureProvider::feature(std::uint16_t class_id) const {
    if (class_id >= table_.rows()) throw std::out_of_range("class id outside embedding table");
    return table_.row(class_id).transpose();
}

Matrix image_features(const ImageFeatureProvider& provider, const SemanticImage& image) {
    const std::size_t pixels = image.class_ids.size();
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(pixels), provider.dim());
    for (std::size_t p = 0; p < pixels; ++p) {
        const std::uint16_t c = image.class_ids[p];
        if (c == kSkyClass) continue;
        if (c >= provider.num_classes()) throw std::out_of_range("class id outside embedding table");
        out.row(static_cast<Eigen::Index>(p)) = provider.table().row(c);
    }
    return out;
}

HeadParams init_head(Eigen::Index out_dim, Eigen::Index in_dim, Rng& rng) {
    if (out_dim < 1 || in_dim < 1) throw std::invalid_argument("head dims must be positive");
    return HeadParams{random_matrix(out_dim, in_dim, std::sqrt(1.0 / in_dim), rng)};
}

Matrix head_forward(const HeadParams& params, const Matrix& input, HeadCache* cache) {
    if (input.cols() != params.weight.cols())
        throw std::invalid_argument("head input width mismatch");
    Matrix out = input * params.weight.transpose();
    Vector norms(out.rows());
    std::vector<std::uint8_t> valid(out.rows(), 1);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        norms[i] = out.row(i).norm();
        if (norms[i] <= kNormEps) {
            out.row(i).setZero();
            valid[i] = 0;
        } else {
            out.row(i) /= norms[i];
        }
    }
    if (cache) {
        cache->input = input;
        cache->output = out;
        cache->norms = std::move(norms);
        cache->valid = std::move(valid);
    }
    return out;
}

HeadGrads head_backward(const HeadParams& params, const HeadCache& cache,
                        const Matrix& d_output) {
    HeadGrads grads;
    grads.weight = Matrix::Zero(params.weight.rows(), params.weight.cols());
    grads.input = Matrix::Zero(cache.input.rows(), cache.input.cols());
    for (Eigen::Index i = 0; i < d_output.rows(); ++i) {
        if (!cache.valid[i]) continue;
        const Vector y = cache.output.row(i).transpose();
        const Vector dy = d_output.row(i).transpose();
        const Vector dz = (dy - y * y.dot(dy)) / cache.norms[i];
        grads.weight.noalias() += dz * cache.input.row(i);
        grads.input.row(i) = (params.weight.transpose() * dz).transpose();
    }
    return grads;
}

PooledFeatures pool_super(const Matrix& rows, const std::vector<std::int32_t>& ids,
                          std::int32_t num_groups, PoolCache* cache) {
    if (static_cast<Eigen::Index>(ids.size()) != rows.rows())
        throw std::invalid_argument("id list does not match row count");
    if (num_groups < 0) throw std::invalid_argument("negative group count");
    Matrix sums = Matrix::Zero(num_groups, rows.cols());
    std::vector<std::int32_t> counts(num_groups, 0);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        const std::int32_t g = ids[i];
        if (g < 0) continue;
        if (g >= num_groups) throw std::out_of_range("group id out of range");
        sums.row(g) += rows.row(i);
        ++counts[g];
    }
    Vector norms = Vector::Zero(num_groups);
    std::vector<std::uint8_t> valid(num_groups, 0);
    for (std::int32_t g = 0; g < num_groups; ++g) {
        if (counts[g] == 0) continue;
        sums.row(g) /= counts[g];
        norms[g] = sums.row(g).norm();
        if (norms[g] <= kNormEps) {
            sums.row(g).setZero();
        } else {
            sums.row(g) /= norms[g];
            valid[g] = 1;
        }
    }
    if (cache) {
        cache->pooled = sums;
        cache->norms = norms;
        cache->counts = counts;
        cache->valid = valid;
    }
    return PooledFeatures{std::move(sums), std::move(valid)};
}

Matrix pool_backward(const PoolCache& cache, const std::vector<std::int32_t>& ids,
                     Eigen::Index num_rows, const Matrix& d_pooled) {
    Matrix d_rows = Matrix::Zero(num_rows, d_pooled.cols());
    // Group-level normalization Jacobian applied once, then shared by members.
    Matrix d_mean = Matrix::Zero(d_pooled.rows(), d_pooled.cols());
    for (Eigen::Index g = 0; g < d_pooled.rows(); ++g) {
        if (!cache.valid[g]) continue;
        const Vector y = cache.pooled.row(g).transpose();
        const Vector dy = d_pooled.row(g).transpose();
        d_mean.row(g) = ((dy - y * y.dot(dy)) / cache.norms[g]).transpose();
    }
    for (Eigen::Index i = 0; i < num_rows; ++i) {
        const std::int32_t g = ids[i];
        if (g < 0 || !cache.valid[g]) continue;
        d_rows.row(i) = d_mean.row(g) / cache.counts[g];
    }
    return d_rows;
}

}  // namespace superflow
