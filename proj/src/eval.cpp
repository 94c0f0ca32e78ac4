#include "superflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "superflow/rng.hpp"

namespace superflow {

namespace {

/// Stacks [coords feats] rows and labels from several clouds, then thins to
/// at most `cap` rows with an even deterministic stride.
void collect_points(const std::vector<PointCloud>& clouds, Eigen::Index cap, Matrix& inputs,
                    std::vector<std::uint16_t>& labels) {
    Eigen::Index total = 0;
    Eigen::Index channels = -1;
    for (const auto& cloud : clouds) {
        total += cloud.size();
        if (channels < 0) channels = cloud.num_channels();
        if (cloud.num_channels() != channels)
            throw std::invalid_argument("clouds disagree in feature channels");
    }
    if (channels < 0) channels = 0;
    Matrix all(total, 3 + channels);
    std::vector<std::uint16_t> all_labels;
    all_labels.reserve(static_cast<std::size_t>(total));
    Eigen::Index offset = 0;
    for (const auto& cloud : clouds) {
        all.middleRows(offset, cloud.size()).leftCols(3) = cloud.coords;
        all.middleRows(offset, cloud.size()).rightCols(channels) = cloud.feats;
        all_labels.insert(all_labels.end(), cloud.labels.begin(), cloud.labels.end());
        offset += cloud.size();
    }
    if (cap <= 0 || total <= cap) {
        inputs = std::move(all);
        labels = std::move(all_labels);
        return;
    }
    inputs.resize(cap, all.cols());
    labels.resize(static_cast<std::size_t>(cap));
    for (Eigen::Index j = 0; j < cap; ++j) {
        const Eigen::Index src = j * total / cap;
        inputs.row(j) = all.row(src);
        labels[static_cast<std::size_t>(j)] = all_labels[static_cast<std::size_t>(src)];
    }
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix probs(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const Eigen::ArrayXd shifted =
            logits.row(i).transpose().array() - logits.row(i).maxCoeff();
        const Eigen::ArrayXd exps = shifted.exp();
        probs.row(i) = (exps / exps.sum()).matrix().transpose();
    }
    return probs;
}

int argmax_row(const Matrix& m, Eigen::Index row) {
    int best = 0;
    double best_value = m(row, 0);
    for (Eigen::Index c = 1; c < m.cols(); ++c) {
        if (m(row, c) > best_value) {
            best_value = m(row, c);
            best = static_cast<int>(c);
        }
    }
    return best;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int num_classes) : num_classes_(num_classes) {
    if (num_classes < 1) throw std::invalid_argument("need at least one class");
    counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

void ConfusionMatrix::add(std::uint16_t truth, std::uint16_t prediction) {
    if (truth >= num_classes_ || prediction >= num_classes_)
        throw std::out_of_range("class id outside confusion matrix");
    ++counts_[static_cast<std::size_t>(truth) * num_classes_ + prediction];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.num_classes_ != num_classes_)
        throw std::invalid_argument("confusion matrices disagree in size");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::at(int truth, int prediction) const {
    return counts_[static_cast<std::size_t>(truth) * num_classes_ + prediction];
}

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

IouSummary iou_from_confusion(const ConfusionMatrix& cm) {
    const int k = cm.num_classes();
    IouSummary summary;
    summary.iou.assign(static_cast<std::size_t>(k), 0.0);
    summary.defined.assign(static_cast<std::size_t>(k), 0);
    double sum = 0.0;
    int defined_count = 0;
    for (int c = 0; c < k; ++c) {
        const std::uint64_t tp = cm.at(c, c);
        std::uint64_t fp = 0, fn = 0;
        for (int o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        const std::uint64_t denom = tp + fp + fn;
        if (denom == 0) continue;
        summary.defined[static_cast<std::size_t>(c)] = 1;
        summary.iou[static_cast<std::size_t>(c)] =
            static_cast<double>(tp) / static_cast<double>(denom);
        sum += summary.iou[static_cast<std::size_t>(c)];
        ++defined_count;
    }
    summary.miou = defined_count > 0 ? sum / defined_count : 0.0;
    return summary;
}

ProbeModel fit_probe(const PointEncoderParams& encoder, const std::vector<PointCloud>& train,
                     int num_classes, const ProbeOptions& options) {
    if (num_classes < 1) throw std::invalid_argument("need at least one class");
    Matrix inputs;
    std::vector<std::uint16_t> labels;
    collect_points(train, options.max_train_points, inputs, labels);
    if (inputs.rows() == 0) throw std::invalid_argument("probe training set is empty");

    const Matrix features = encoder_forward(encoder, inputs);
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();

    ProbeModel probe;
    probe.weights = Matrix::Zero(num_classes, d);
    probe.bias = Vector::Zero(num_classes);
    probe.train_support.assign(static_cast<std::size_t>(num_classes), 0);
    for (const std::uint16_t label : labels) {
        if (label >= num_classes) throw std::out_of_range("label outside class range");
        probe.train_support[label] = 1;
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    for (int iter = 0; iter < options.steps; ++iter) {
        Matrix logits = features * probe.weights.transpose();
        logits.rowwise() += probe.bias.transpose();
        Matrix residual = softmax_rows(logits);
        for (Eigen::Index i = 0; i < n; ++i) residual(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
        probe.weights -= options.lr * inv_n * (residual.transpose() * features);
        probe.bias -= options.lr * inv_n * residual.colwise().sum().transpose();
    }
    return probe;
}

IouSummary evaluate_probe(const PointEncoderParams& encoder, const ProbeModel& probe,
                          const std::vector<PointCloud>& eval_clouds, int num_classes,
                          const ProbeOptions& options) {
    Matrix inputs;
    std::vector<std::uint16_t> labels;
    collect_points(eval_clouds, options.max_eval_points, inputs, labels);
    const Matrix features = encoder_forward(encoder, inputs);
    Matrix logits = features * probe.weights.transpose();
    logits.rowwise() += probe.bias.transpose();

    ConfusionMatrix cm(num_classes);
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        cm.add(labels[static_cast<std::size_t>(i)],
               static_cast<std::uint16_t>(argmax_row(logits, i)));

    IouSummary summary = iou_from_confusion(cm);
    double sum = 0.0;
    int defined_count = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (!probe.train_support[static_cast<std::size_t>(c)])
            summary.defined[static_cast<std::size_t>(c)] = 0;
        if (summary.defined[static_cast<std::size_t>(c)]) {
            sum += summary.iou[static_cast<std::size_t>(c)];
            ++defined_count;
        }
    }
    summary.miou = defined_count > 0 ? sum / defined_count : 0.0;
    return summary;
}

ProbeResult linear_probe(const PointEncoderParams& encoder, const std::vector<PointCloud>& train,
                         const std::vector<PointCloud>& eval_clouds, int num_classes,
                         const ProbeOptions& options) {
    ProbeResult result;
    result.model = fit_probe(encoder, train, num_classes, options);
    result.scores = evaluate_probe(encoder, result.model, eval_clouds, num_classes, options);
    return result;
}

CeRr ce_rr(const std::array<double, 3>& model_scores,
           const std::array<double, 3>& baseline_scores, double clean_miou) {
    CeRr out;
    double err_model = 0.0, err_base = 0.0, score_sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        err_model += 1.0 - model_scores[static_cast<std::size_t>(i)];
        err_base += 1.0 - baseline_scores[static_cast<std::size_t>(i)];
        score_sum += model_scores[static_cast<std::size_t>(i)];
    }
    if (err_base == 0.0) {
        out.ce_defined = false;
    } else {
        out.ce = err_model / err_base;
    }
    if (clean_miou == 0.0) {
        out.rr_defined = false;
    } else {
        out.rr = score_sum / (3.0 * clean_miou);
    }
    return out;
}

PointCloud corrupt_beam_missing(const PointCloud& cloud, double drop_fraction,
                                const LidarSpec& lidar, std::uint64_t seed) {
    if (drop_fraction < 0.0 || drop_fraction > 1.0)
        throw std::invalid_argument("drop fraction outside [0, 1]");
    const int beams = lidar.num_beams;
    const int drop = static_cast<int>(std::llround(drop_fraction * beams));

    std::vector<int> order(static_cast<std::size_t>(beams));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0xbea3));
    for (int i = beams - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    std::vector<std::uint8_t> dropped(static_cast<std::size_t>(beams), 0);
    for (int i = 0; i < drop; ++i) dropped[static_cast<std::size_t>(order[i])] = 1;

    std::vector<Eigen::Index> keep;
    keep.reserve(static_cast<std::size_t>(cloud.size()));
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        const double range_xy = std::hypot(cloud.coords(i, 0), cloud.coords(i, 1));
        const double elevation = std::atan2(cloud.coords(i, 2), range_xy);
        int ring = 0;
        double best = std::abs(elevation - lidar.beam_elevation(0));
        for (int b = 1; b < beams; ++b) {
            const double dist = std::abs(elevation - lidar.beam_elevation(b));
            if (dist < best) {
                best = dist;
                ring = b;
            }
        }
        if (!dropped[static_cast<std::size_t>(ring)]) keep.push_back(i);
    }

    PointCloud out;
    out.coords.resize(static_cast<Eigen::Index>(keep.size()), 3);
    out.feats.resize(static_cast<Eigen::Index>(keep.size()), cloud.num_channels());
    out.labels.reserve(keep.size());
    out.timestamp = cloud.timestamp;
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.coords.row(static_cast<Eigen::Index>(j)) = cloud.coords.row(keep[j]);
        out.feats.row(static_cast<Eigen::Index>(j)) = cloud.feats.row(keep[j]);
        out.labels.push_back(cloud.labels[static_cast<std::size_t>(keep[j])]);
    }
    return out;
}

}  // namespace superflow
