#include "superflow/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

#include "superflow/losses.hpp"
#include "superflow/rng.hpp"

namespace superflow {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kInitSalt = 0x8f1e57a11ULL;

Matrix point_input(const PointCloud& cloud) {
    Matrix input(cloud.size(), 3 + cloud.num_channels());
    input.leftCols(3) = cloud.coords;
    input.rightCols(cloud.num_channels()) = cloud.feats;
    return input;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::int32_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

void scatter_add(Matrix& target, const std::vector<std::int32_t>& rows, const Matrix& values,
                 double scale) {
    for (std::size_t i = 0; i < rows.size(); ++i)
        target.row(rows[i]) += scale * values.row(static_cast<Eigen::Index>(i));
}

template <typename T>
void adamw(T& param, const T& grad, T& m, T& v, double lr, std::uint64_t t, bool decay) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v = (kAdamBeta2 * v.array() + (1.0 - kAdamBeta2) * grad.array().square()).matrix();
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
    T update = ((m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps)).matrix();
    if (decay) update += kWeightDecay * param;
    param -= lr * update;
}

}  // namespace

double one_cycle_lr(std::uint64_t step, std::uint64_t total, double base) {
    if (total == 0) throw std::invalid_argument("schedule needs at least one step");
    if (step >= total) throw std::invalid_argument("step outside schedule");
    const double warm = std::max(1.0, std::round(kWarmupFraction * static_cast<double>(total)));
    const double s = static_cast<double>(step);
    if (s < warm) {
        const double start = base / kInitialDiv;
        return start + (base - start) * (s / warm);
    }
    const double final_lr = base / kFinalDiv;
    const double last = static_cast<double>(total - 1);
    if (last <= warm) return base;
    const double u = (s - warm) / (last - warm);
    return final_lr + 0.5 * (base - final_lr) * (1.0 + std::cos(kPi * u));
}

Checkpoint init_trainer(const TrainConfig& config, int num_classes, int feat_channels) {
    if (config.steps == 0) throw std::invalid_argument("steps must be positive");
    if (config.dt <= 0.0) throw std::invalid_argument("dt must be positive");
    if (config.tau <= 0.0) throw std::invalid_argument("tau must be positive");
    if (config.num_sweeps < 0) throw std::invalid_argument("negative sweep count");
    if (num_classes < 1 || feat_channels < 0) throw std::invalid_argument("bad model shape");

    Checkpoint state;
    state.config = config;
    Rng rng(mix_seed(config.seed, kInitSalt));
    state.model.encoder =
        init_point_encoder(3 + feat_channels, config.hidden_dim, config.point_dim, rng);
    state.model.head_point = init_head(config.head_dim, config.point_dim, rng);
    state.model.head_image = init_head(config.head_dim, config.embed_dim, rng);
    state.model.image_table =
        ImageFeatureProvider(num_classes, config.embed_dim, config.seed).table();

    auto& opt = state.opt;
    const auto& m = state.model;
    opt.m_w1 = Matrix::Zero(m.encoder.w1.rows(), m.encoder.w1.cols());
    opt.v_w1 = opt.m_w1;
    opt.m_b1 = Vector::Zero(m.encoder.b1.size());
    opt.v_b1 = opt.m_b1;
    opt.m_w2 = Matrix::Zero(m.encoder.w2.rows(), m.encoder.w2.cols());
    opt.v_w2 = opt.m_w2;
    opt.m_b2 = Vector::Zero(m.encoder.b2.size());
    opt.v_b2 = opt.m_b2;
    opt.m_head_point = Matrix::Zero(m.head_point.weight.rows(), m.head_point.weight.cols());
    opt.v_head_point = opt.m_head_point;
    opt.m_head_image = Matrix::Zero(m.head_image.weight.rows(), m.head_image.weight.cols());
    opt.v_head_image = opt.m_head_image;
    opt.t = 0;
    return state;
}

PreparedTriple prepare_triple(const TrainConfig& config,
                              const std::vector<FrameBundle>& triple) {
    if (triple.size() != 3) throw std::invalid_argument("triple must hold three bundles");
    if (!(triple[0].timestamp < triple[1].timestamp && triple[1].timestamp < triple[2].timestamp))
        throw std::invalid_argument("triple timestamps must increase");
    PreparedTriple prepared;
    for (int f = 0; f < 3; ++f) {
        const FrameBundle& bundle = triple[static_cast<std::size_t>(f)];
        SuperpixelSet set = config.enable_vc ? build_view_consistent_superpixels(bundle.images)
                                             : build_per_view_superpixels(bundle.images);
        PreparedFrame& frame = prepared.frames[static_cast<std::size_t>(f)];
        frame.input = point_input(bundle.keyframe);
        frame.point_ids = assign_superpoints(bundle.keyframe, set, bundle.calibrations).point_ids;
        if (f == 1 && config.enable_d2s) {
            const PointCloud dense = build_dense_cloud(bundle);
            prepared.dense_ids =
                propagate_dense_superpoints(dense, set, bundle.calibrations).point_ids;
            prepared.dense_input = point_input(dense);
        }
        set.views.clear();
        frame.id_space = std::move(set);
    }
    return prepared;
}

StepRecord train_step_prepared(Checkpoint& state, const PreparedTriple& triple) {
    const TrainConfig& config = state.config;
    StepRecord record;
    record.step = state.step;
    record.lr = one_cycle_lr(state.step, config.steps, config.base_lr);

    // Forward over the three keyframes: point branch to pooled region
    // features, image branch to per-region key features.
    std::array<EncoderCache, 3> enc_cache;
    std::array<HeadCache, 3> hp_cache;
    std::array<PoolCache, 3> pool_cache;
    std::array<HeadCache, 3> hi_cache;
    std::array<Matrix, 3> pooled;
    std::array<Matrix, 3> image_keys;
    for (int f = 0; f < 3; ++f) {
        const PreparedFrame& frame = triple.frames[static_cast<std::size_t>(f)];
        const std::int32_t groups = frame.id_space.num_ids();
        const Matrix features =
            encoder_forward(state.model.encoder, frame.input, &enc_cache[f]);
        const Matrix projected = head_forward(state.model.head_point, features, &hp_cache[f]);
        pooled[f] = pool_super(projected, frame.point_ids, groups, &pool_cache[f]).features;
        Matrix table_rows(groups, state.model.image_table.cols());
        for (std::int32_t g = 0; g < groups; ++g)
            table_rows.row(g) = state.model.image_table.row(frame.id_space.id_class[g]);
        image_keys[f] = head_forward(state.model.head_image, table_rows, &hi_cache[f]);
    }

    EncoderCache enc_cache_d;
    HeadCache hp_cache_d;
    PoolCache pool_cache_d;
    Matrix pooled_dense;
    const std::int32_t center_groups = triple.frames[1].id_space.num_ids();
    if (config.enable_d2s) {
        const Matrix features =
            encoder_forward(state.model.encoder, triple.dense_input, &enc_cache_d);
        const Matrix projected = head_forward(state.model.head_point, features, &hp_cache_d);
        pooled_dense =
            pool_super(projected, triple.dense_ids, center_groups, &pool_cache_d).features;
    }

    // Losses and gradients at the pooled level.
    std::array<Matrix, 3> d_pooled;
    std::array<Matrix, 3> d_image;
    for (int f = 0; f < 3; ++f) {
        d_pooled[f] = Matrix::Zero(pooled[f].rows(), pooled[f].cols());
        d_image[f] = Matrix::Zero(image_keys[f].rows(), image_keys[f].cols());
    }
    Matrix d_dense;
    if (config.enable_d2s) d_dense = Matrix::Zero(pooled_dense.rows(), pooled_dense.cols());

    bool any_active = false;
    double sc_sum = 0.0;
    for (int f = 0; f < 3; ++f) {
        std::vector<std::int32_t> rows;
        for (std::int32_t g = 0; g < triple.frames[f].id_space.num_ids(); ++g)
            if (pool_cache[f].valid[g] && hi_cache[f].valid[g]) rows.push_back(g);
        if (rows.empty()) continue;
        any_active = true;
        const LossGrad loss = spatial_contrastive(gather_rows(pooled[f], rows),
                                                  gather_rows(image_keys[f], rows), config.tau);
        sc_sum += loss.value;
        scatter_add(d_pooled[f], rows, loss.d_a, config.w_sc / 3.0);
        scatter_add(d_image[f], rows, loss.d_b, config.w_sc / 3.0);
    }
    record.l_sc = sc_sum / 3.0;

    if (config.enable_fcl) {
        auto plan_against = [&](int other) {
            std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> plan;
            for (const auto& [gc, go] :
                 match_ids(triple.frames[1].id_space, triple.frames[other].id_space)) {
                if (pool_cache[1].valid[gc] && pool_cache[other].valid[go]) {
                    plan.first.push_back(gc);
                    plan.second.push_back(go);
                }
            }
            return plan;
        };
        const auto prev = plan_against(0);
        const auto next = plan_against(2);
        if (!prev.first.empty() || !next.first.empty()) any_active = true;
        const TemporalLossGrad loss = temporal_contrastive(
            gather_rows(pooled[1], prev.first), gather_rows(pooled[0], prev.second),
            gather_rows(pooled[1], next.first), gather_rows(pooled[2], next.second), config.tau);
        record.l_tc = loss.value;
        scatter_add(d_pooled[1], prev.first, loss.d_center_prev, config.w_tc);
        scatter_add(d_pooled[0], prev.second, loss.d_prev, config.w_tc);
        scatter_add(d_pooled[1], next.first, loss.d_center_next, config.w_tc);
        scatter_add(d_pooled[2], next.second, loss.d_next, config.w_tc);
    }

    if (config.enable_d2s) {
        std::vector<std::int32_t> rows;
        for (std::int32_t g = 0; g < center_groups; ++g)
            if (pool_cache[1].valid[g] && pool_cache_d.valid[g]) rows.push_back(g);
        if (!rows.empty()) {
            any_active = true;
            const LossGrad loss =
                d2s_loss(gather_rows(pooled[1], rows), gather_rows(pooled_dense, rows));
            record.l_d2s = loss.value;
            scatter_add(d_pooled[1], rows, loss.d_a, config.w_d2s);
            scatter_add(d_dense, rows, loss.d_b, config.w_d2s);
        }
    }

    record.total =
        config.w_sc * record.l_sc + config.w_tc * record.l_tc + config.w_d2s * record.l_d2s;

    if (!any_active) {
        record.skipped = true;
        state.history.push_back(record);
        ++state.step;
        return record;
    }

    // Backward through pooling, heads, and the shared point encoder.
    PointEncoderGrads enc_grads;
    enc_grads.w1 = Matrix::Zero(state.model.encoder.w1.rows(), state.model.encoder.w1.cols());
    enc_grads.b1 = Vector::Zero(state.model.encoder.b1.size());
    enc_grads.w2 = Matrix::Zero(state.model.encoder.w2.rows(), state.model.encoder.w2.cols());
    enc_grads.b2 = Vector::Zero(state.model.encoder.b2.size());
    Matrix d_head_point = Matrix::Zero(state.model.head_point.weight.rows(),
                                       state.model.head_point.weight.cols());
    Matrix d_head_image = Matrix::Zero(state.model.head_image.weight.rows(),
                                       state.model.head_image.weight.cols());

    auto backward_point_branch = [&](const Matrix& d_pool_mat, const PoolCache& pc,
                                     const std::vector<std::int32_t>& ids, const HeadCache& hc,
                                     const EncoderCache& ec) {
        const Matrix d_rows = pool_backward(pc, ids, hc.input.rows(), d_pool_mat);
        const HeadGrads head = head_backward(state.model.head_point, hc, d_rows);
        d_head_point += head.weight;
        const PointEncoderGrads enc =
            encoder_backward(state.model.encoder, ec, head.input);
        enc_grads.w1 += enc.w1;
        enc_grads.b1 += enc.b1;
        enc_grads.w2 += enc.w2;
        enc_grads.b2 += enc.b2;
    };
    for (int f = 0; f < 3; ++f) {
        backward_point_branch(d_pooled[f], pool_cache[f],
                              triple.frames[static_cast<std::size_t>(f)].point_ids, hp_cache[f],
                              enc_cache[f]);
        d_head_image += head_backward(state.model.head_image, hi_cache[f], d_image[f]).weight;
    }
    if (config.enable_d2s)
        backward_point_branch(d_dense, pool_cache_d, triple.dense_ids, hp_cache_d, enc_cache_d);

    auto& opt = state.opt;
    ++opt.t;
    adamw(state.model.encoder.w1, enc_grads.w1, opt.m_w1, opt.v_w1, record.lr, opt.t, true);
    adamw(state.model.encoder.b1, enc_grads.b1, opt.m_b1, opt.v_b1, record.lr, opt.t, false);
    adamw(state.model.encoder.w2, enc_grads.w2, opt.m_w2, opt.v_w2, record.lr, opt.t, true);
    adamw(state.model.encoder.b2, enc_grads.b2, opt.m_b2, opt.v_b2, record.lr, opt.t, false);
    adamw(state.model.head_point.weight, d_head_point, opt.m_head_point, opt.v_head_point,
          record.lr, opt.t, true);
    adamw(state.model.head_image.weight, d_head_image, opt.m_head_image, opt.v_head_image,
          record.lr, opt.t, true);

    state.history.push_back(record);
    ++state.step;
    return record;
}

StepRecord train_step(Checkpoint& state, const std::vector<FrameBundle>& triple) {
    return train_step_prepared(state, prepare_triple(state.config, triple));
}

Checkpoint run_pretraining(const TrainConfig& config, const PretrainData& data,
                           const Checkpoint* resume) {
    if (data.scene_specs.empty()) throw std::invalid_argument("dataset has no scenes");
    if (data.keyframe_times.empty()) throw std::invalid_argument("dataset has no keyframes");
    const std::size_t scene_limit =
        config.scenes_per_epoch == 0
            ? data.scene_specs.size()
            : std::min<std::size_t>(config.scenes_per_epoch, data.scene_specs.size());

    const double back_margin = config.dt + config.num_sweeps / data.lidar.sweep_hz;
    std::vector<Scene> scenes;
    std::vector<std::vector<double>> centers(scene_limit);
    scenes.reserve(scene_limit);
    for (std::size_t i = 0; i < scene_limit; ++i) {
        scenes.push_back(generate_scene(data.scene_specs[i]));
        for (const double t : data.keyframe_times)
            if (scenes[i].in_span(t - back_margin) && scenes[i].in_span(t + config.dt))
                centers[i].push_back(t);
        if (centers[i].empty())
            throw std::invalid_argument("no keyframe admits the configured window");
    }

    Checkpoint state;
    if (resume) {
        if (!(resume->config == config))
            throw std::invalid_argument("resume checkpoint config mismatch");
        state = *resume;
    } else {
        state = init_trainer(config, data.num_classes, data.feat_channels);
    }

    std::map<std::pair<std::size_t, std::size_t>, PreparedTriple> prepared;
    while (state.step < config.steps) {
        Rng rng(mix_seed(config.seed, state.step));
        const std::size_t scene_idx = static_cast<std::size_t>(rng.uniform_int(scene_limit));
        const std::size_t center_idx =
            static_cast<std::size_t>(rng.uniform_int(centers[scene_idx].size()));
        const auto key = std::make_pair(scene_idx, center_idx);
        auto it = prepared.find(key);
        if (it == prepared.end()) {
            const auto triple =
                sample_sequence(scenes[scene_idx], centers[scene_idx][center_idx], config.dt,
                                config.num_sweeps, data.lidar, data.rig);
            it = prepared.emplace(key, prepare_triple(config, triple)).first;
        }
        train_step_prepared(state, it->second);
    }
    return state;
}

}  // namespace superflow
