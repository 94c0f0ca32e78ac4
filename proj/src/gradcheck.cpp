#include "superflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "superflow/encoder.hpp"
#include "superflow/losses.hpp"
#include "superflow/rng.hpp"

namespace superflow {

namespace {

constexpr double kFdStep = 1e-6;
constexpr double kTolerance = 1e-5;
constexpr int kInstancesPerOp = 24;

Matrix randn(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
    return m;
}

Matrix unit_rows(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m = randn(rng, rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        while (m.row(r).norm() < 1e-3)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
        m.row(r) /= m.row(r).norm();
    }
    return m;
}

/// Perturbs every coefficient handed to check() and accumulates the
/// instance-wide error: max|analytic - numeric| / max(max|numeric|, 1e-8).
class FdHarness {
  public:
    explicit FdHarness(std::function<double()> eval) : eval_(std::move(eval)) {}

    template <typename T>
    void check(T& param, const T& analytic) {
        for (Eigen::Index i = 0; i < param.size(); ++i) {
            double& x = param.data()[i];
            const double orig = x;
            x = orig + kFdStep;
            const double up = eval_();
            x = orig - kFdStep;
            const double down = eval_();
            x = orig;
            const double numeric = (up - down) / (2.0 * kFdStep);
            scale_ = std::max(scale_, std::abs(numeric));
            max_diff_ = std::max(max_diff_, std::abs(analytic.data()[i] - numeric));
        }
    }

    double rel_err() const { return max_diff_ / scale_; }

  private:
    std::function<double()> eval_;
    double max_diff_ = 0.0;
    double scale_ = 1e-8;
};

double d2s_instance(Rng& rng) {
    const Eigen::Index v = 2 + static_cast<Eigen::Index>(rng.uniform_int(4));
    const Eigen::Index d = 3 + static_cast<Eigen::Index>(rng.uniform_int(3));
    Matrix a = unit_rows(rng, v, d);
    Matrix b = unit_rows(rng, v, d);
    FdHarness h([&] { return d2s_loss(a, b).value; });
    const LossGrad g = d2s_loss(a, b);
    h.check(a, g.d_a);
    h.check(b, g.d_b);
    return h.rel_err();
}

double spatial_instance(Rng& rng) {
    const Eigen::Index v = 2 + static_cast<Eigen::Index>(rng.uniform_int(4));
    const Eigen::Index d = 3 + static_cast<Eigen::Index>(rng.uniform_int(3));
    const double tau = 0.07 + 0.9 * rng.uniform01();
    Matrix q = unit_rows(rng, v, d);
    Matrix k = unit_rows(rng, v, d);
    FdHarness h([&] { return spatial_contrastive(q, k, tau).value; });
    const LossGrad g = spatial_contrastive(q, k, tau);
    h.check(q, g.d_a);
    h.check(k, g.d_b);
    return h.rel_err();
}

double temporal_instance(Rng& rng) {
    const Eigen::Index v1 = 1 + static_cast<Eigen::Index>(rng.uniform_int(4));
    const Eigen::Index v2 = 1 + static_cast<Eigen::Index>(rng.uniform_int(4));
    const Eigen::Index d = 3 + static_cast<Eigen::Index>(rng.uniform_int(3));
    const double tau = 0.07 + 0.9 * rng.uniform01();
    Matrix cp = unit_rows(rng, v1, d);
    Matrix prev = unit_rows(rng, v1, d);
    Matrix cn = unit_rows(rng, v2, d);
    Matrix next = unit_rows(rng, v2, d);
    FdHarness h([&] { return temporal_contrastive(cp, prev, cn, next, tau).value; });
    const TemporalLossGrad g = temporal_contrastive(cp, prev, cn, next, tau);
    h.check(cp, g.d_center_prev);
    h.check(prev, g.d_prev);
    h.check(cn, g.d_center_next);
    h.check(next, g.d_next);
    return h.rel_err();
}

double head_instance(Rng& rng) {
    const Eigen::Index out = 3 + static_cast<Eigen::Index>(rng.uniform_int(3));
    const Eigen::Index in = 3 + static_cast<Eigen::Index>(rng.uniform_int(3));
    const Eigen::Index v = 2 + static_cast<Eigen::Index>(rng.uniform_int(3));
    for (;;) {
        HeadParams params{randn(rng, out, in)};
        Matrix x = randn(rng, v, in);
        HeadCache cache;
        head_forward(params, x, &cache);
        // Keep away from the flagged-degenerate branch: a perturbation must
        // never flip a row's validity.
        if (cache.norms.minCoeff() < 1e-3) continue;
        const Matrix omega = randn(rng, v, out);
        FdHarness h([&] { return (head_forward(params, x).array() * omega.array()).sum(); });
        const HeadGrads g = head_backward(params, cache, omega);
        h.check(params.weight, g.weight);
        h.check(x, g.input);
        return h.rel_err();
    }
}

double encoder_instance(Rng& rng) {
    const Eigen::Index in = 3 + static_cast<Eigen::Index>(rng.uniform_int(2));
    const Eigen::Index hidden = 4 + static_cast<Eigen::Index>(rng.uniform_int(3));
    const Eigen::Index out = 3 + static_cast<Eigen::Index>(rng.uniform_int(3));
    const Eigen::Index v = 2 + static_cast<Eigen::Index>(rng.uniform_int(3));
    for (;;) {
        PointEncoderParams params = init_point_encoder(in, hidden, out, rng);
        Matrix x = randn(rng, v, in);
        const Matrix preact = (x * params.w1.transpose()).rowwise() + params.b1.transpose();
        // relu kink: a central difference straddling zero is one-sided.
        if (preact.array().abs().minCoeff() < 1e-4) continue;
        const Matrix omega = randn(rng, v, out);
        FdHarness h([&] { return (encoder_forward(params, x).array() * omega.array()).sum(); });
        EncoderCache cache;
        encoder_forward(params, x, &cache);
        PointEncoderGrads g = encoder_backward(params, cache, omega);
        h.check(params.w1, g.w1);
        h.check(params.b1, g.b1);
        h.check(params.w2, g.w2);
        h.check(params.b2, g.b2);
        return h.rel_err();
    }
}

double pool_instance(Rng& rng) {
    const Eigen::Index d = 3 + static_cast<Eigen::Index>(rng.uniform_int(3));
    const std::int32_t groups = 2 + static_cast<std::int32_t>(rng.uniform_int(3));
    const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.uniform_int(5));
    for (;;) {
        Matrix rows = randn(rng, n, d);
        std::vector<std::int32_t> ids;
        ids.reserve(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i)
            ids.push_back(static_cast<std::int32_t>(rng.uniform_int(
                              static_cast<std::uint64_t>(groups) + 1)) -
                          1);
        PoolCache cache;
        pool_super(rows, ids, groups, &cache);
        bool near_degenerate = false;
        for (std::int32_t g = 0; g < groups; ++g)
            if (cache.counts[static_cast<std::size_t>(g)] > 0 && cache.norms[g] < 1e-3)
                near_degenerate = true;
        if (near_degenerate) continue;
        const Matrix omega = randn(rng, groups, d);
        FdHarness h(
            [&] { return (pool_super(rows, ids, groups).features.array() * omega.array()).sum(); });
        const Matrix g_rows = pool_backward(cache, ids, n, omega);
        h.check(rows, g_rows);
        return h.rel_err();
    }
}

}  // namespace

std::vector<GradCheckReport> run_gradcheck(std::uint64_t seed) {
    struct Op {
        const char* name;
        double (*instance)(Rng&);
        std::uint64_t salt;
    };
    const Op ops[] = {
        {"d2s", &d2s_instance, 1},          {"spatial", &spatial_instance, 2},
        {"temporal", &temporal_instance, 3}, {"apply_head", &head_instance, 4},
        {"encode_points", &encoder_instance, 5}, {"pool_super", &pool_instance, 6},
    };
    std::vector<GradCheckReport> reports;
    for (const Op& op : ops) {
        Rng rng(mix_seed(seed, op.salt));
        GradCheckReport report;
        report.name = op.name;
        report.instances = kInstancesPerOp;
        for (int i = 0; i < kInstancesPerOp; ++i)
            report.max_rel_err = std::max(report.max_rel_err, op.instance(rng));
        report.pass = report.max_rel_err < kTolerance;
        reports.push_back(std::move(report));
    }
    return reports;
}

}  // namespace superflow
