// Acceptance gate: ten end-to-end criteria, one line each, nonzero exit on
// any failure. Tolerances are pinned here rather than shared with the code
// under test.
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "superflow/eval.hpp"
#include "superflow/gradcheck.hpp"
#include "superflow/io.hpp"
#include "superflow/losses.hpp"
#include "superflow/rng.hpp"
#include "superflow/trainer.hpp"

#include "oracles.hpp"

using namespace superflow;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int index, const std::string& label, bool pass, const std::string& detail) {
    std::cout << "AC-" << index << " " << label << ": " << (pass ? "PASS" : "FAIL");
    if (!detail.empty()) std::cout << " [" << detail << "]";
    std::cout << std::endl;
    if (!pass) ++failures;
}

template <typename Fn>
void criterion(int index, const std::string& label, Fn&& fn) {
    try {
        std::string detail;
        const bool pass = fn(detail);
        report(index, label, pass, detail);
    } catch (const std::exception& err) {
        report(index, label, false, std::string("exception: ") + err.what());
    }
}

std::string num(double v) {
    std::ostringstream out;
    out << std::setprecision(3) << v;
    return out.str();
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Matrix randn(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
    return m;
}

Matrix unit_rows(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m = randn(rng, rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        while (m.row(r).norm() < 1e-3) m.row(r) = randn(rng, 1, cols);
        m.row(r).normalize();
    }
    return m;
}

RigidTransform random_transform(Rng& rng) {
    const Eigen::AngleAxisd tilt(rng.uniform(-0.5, 0.5), Vec3::UnitX());
    const Eigen::AngleAxisd yaw(rng.uniform(-3.0, 3.0), Vec3::UnitZ());
    RigidTransform t;
    t.rotation = (tilt * yaw).toRotationMatrix();
    t.translation = Vec3(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
    return t;
}

CameraCalibration random_camera(Rng& rng) {
    CameraCalibration calib;
    calib.intrinsics.fx = rng.uniform(50.0, 200.0);
    calib.intrinsics.fy = rng.uniform(50.0, 200.0);
    calib.intrinsics.cx = rng.uniform(20.0, 44.0);
    calib.intrinsics.cy = rng.uniform(16.0, 32.0);
    calib.extrinsic = random_transform(rng);
    calib.height = 48;
    calib.width = 64;
    return calib;
}

bool same_matrix(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

bool same_history(const std::vector<StepRecord>& a, const std::vector<StepRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].step != b[i].step || a[i].lr != b[i].lr || a[i].l_sc != b[i].l_sc ||
            a[i].l_tc != b[i].l_tc || a[i].l_d2s != b[i].l_d2s || a[i].total != b[i].total ||
            a[i].skipped != b[i].skipped)
            return false;
    return true;
}

std::vector<char> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// AC-1: analytic gradients agree with central finite differences.
bool ac1(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    const auto reports = run_gradcheck(2026);
    const double elapsed = seconds_since(start);
    bool pass = reports.size() == 6 && elapsed < 10.0;
    double worst = 0.0;
    for (const auto& r : reports) {
        pass = pass && r.pass && r.max_rel_err < 1e-5;
        worst = std::max(worst, r.max_rel_err);
    }
    detail = "6 ops, max rel err " + num(worst) + ", " + num(elapsed) + " s";
    return pass;
}

// ---------------------------------------------------------------------------
// AC-2: closed-form loss values.
bool ac2(std::string& detail) {
    bool pass = true;
    Rng rng(2);
    const Matrix a = unit_rows(rng, 5, 6);
    pass = pass && std::abs(d2s_loss(a, a).value) <= 1e-12;

    Matrix b = Matrix::Zero(2, 4), c = Matrix::Zero(2, 4);
    b(0, 0) = 1.0;
    b(1, 1) = 1.0;
    c(0, 1) = 1.0;
    c(1, 2) = 1.0;
    pass = pass && std::abs(d2s_loss(b, c).value - 1.0) <= 1e-12;

    Matrix single(1, 3);
    single << 0.0, 1.0, 0.0;
    pass = pass && std::abs(spatial_contrastive(single, single, 0.07).value) <= 1e-12;

    Matrix q = Matrix::Zero(2, 3), k = Matrix::Zero(2, 3);
    q(0, 0) = 1.0;
    q(1, 1) = 1.0;
    k = q;
    const double two_pair = 0.31326168751822286;  // log(1 + e^-1)
    pass = pass && std::abs(spatial_contrastive(q, k, 1.0).value - two_pair) <= 1e-10;

    Matrix u(1, 3), v(1, 3);
    u << 1.0, 0.0, 0.0;
    v << 0.0, 0.0, 1.0;
    pass = pass && std::abs(temporal_contrastive(u, u, v, v, 0.07).value) <= 1e-12;
    pass = pass && std::abs(temporal_contrastive(q, k, q, k, 1.0).value - two_pair) <= 1e-10;
    detail = "identical/orthogonal pairs, log(1+e^-1) two-pair case";
    return pass;
}

// ---------------------------------------------------------------------------
// AC-3: library outputs equal independent scalar oracles on random inputs.
bool ac3(std::string& detail) {
    constexpr int kInstances = 100;
    double worst = 0.0;
    int assign_mismatches = 0;
    int projections_checked = 0;

    {  // project_point
        Rng rng(mix_seed(3, 1));
        for (int i = 0; i < kInstances; ++i) {
            CameraCalibration calib = random_camera(rng);
            for (int p = 0; p < 4; ++p) {
                Vec3 point;
                if (p < 3) {
                    // Aim into the frustum: pick a camera-frame point first.
                    const double z = rng.uniform(0.5, 6.0);
                    const Vec3 cam_point(
                        z * (rng.uniform(0.0, calib.width) - calib.intrinsics.cx) /
                            calib.intrinsics.fx,
                        z * (rng.uniform(0.0, calib.height) - calib.intrinsics.cy) /
                            calib.intrinsics.fy,
                        z);
                    point = invert(calib.extrinsic).apply(cam_point);
                } else {
                    point = Vec3(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0),
                                 rng.uniform(-4.0, 4.0));
                }
                const auto got = project_point(point, calib);
                const auto want = oracles::project({point.x(), point.y(), point.z()}, calib);
                if (got.has_value() != want.has_value()) return false;
                if (!got) continue;
                ++projections_checked;
                worst = std::max({worst, std::abs(got->u - want->u),
                                  std::abs(got->v - want->v),
                                  std::abs(got->depth - want->depth)});
            }
        }
        if (projections_checked < kInstances / 4) {
            detail = "too few accepted projections";
            return false;
        }
    }

    {  // transform_points
        Rng rng(mix_seed(3, 2));
        for (int i = 0; i < kInstances; ++i) {
            const RigidTransform t = random_transform(rng);
            const Matrix pts = randn(rng, 5, 3) * 3.0;
            const Matrix got = transform_points(pts, t);
            for (Eigen::Index r = 0; r < pts.rows(); ++r) {
                const auto want =
                    oracles::apply_rigid(t, {pts(r, 0), pts(r, 1), pts(r, 2)});
                for (int d = 0; d < 3; ++d)
                    worst = std::max(worst, std::abs(got(r, d) - want[static_cast<std::size_t>(d)]));
            }
        }
    }

    {  // pool_super
        Rng rng(mix_seed(3, 3));
        for (int i = 0; i < kInstances; ++i) {
            const Matrix rows = randn(rng, 12, 5);
            std::vector<std::int32_t> ids;
            std::vector<int> oracle_ids;
            for (int r = 0; r < 12; ++r) {
                const int id = static_cast<int>(rng.uniform_int(5)) - 1;
                ids.push_back(id);
                oracle_ids.push_back(id);
            }
            const PooledFeatures got = pool_super(rows, ids, 4);
            const auto want = oracles::pool(oracles::to_rows(rows), oracle_ids, 4);
            for (int g = 0; g < 4; ++g) {
                if (static_cast<bool>(got.valid[static_cast<std::size_t>(g)]) !=
                    want.valid[static_cast<std::size_t>(g)])
                    return false;
                for (int d = 0; d < 5; ++d)
                    worst = std::max(worst,
                                     std::abs(got.features(g, d) -
                                              want.rows[static_cast<std::size_t>(g)]
                                                       [static_cast<std::size_t>(d)]));
            }
        }
    }

    {  // assign_superpoints
        Rng rng(mix_seed(3, 4));
        for (int i = 0; i < kInstances; ++i) {
            std::vector<CameraCalibration> rig = {random_camera(rng), random_camera(rng)};
            SuperpixelSet set;
            const int num_ids = 6;
            for (const auto& cam : rig) {
                SuperpixelMap map;
                map.height = cam.height;
                map.width = cam.width;
                for (int p = 0; p < cam.height * cam.width; ++p)
                    map.ids.push_back(static_cast<std::int32_t>(rng.uniform_int(num_ids + 1)) -
                                      1);
                set.views.push_back(std::move(map));
            }
            for (int g = 0; g < num_ids; ++g) {
                set.id_class.push_back(static_cast<std::uint16_t>(g));
                set.id_view.push_back(kUnassigned);
            }
            PointCloud cloud;
            cloud.coords = randn(rng, 30, 3) * 4.0;
            cloud.feats = Matrix::Ones(30, 1);
            cloud.labels.assign(30, 0);
            const auto got = assign_superpoints(cloud, set, rig);
            const auto want = oracles::assign(cloud.coords, set, rig);
            for (std::size_t p = 0; p < want.size(); ++p)
                if (got.point_ids[p] != want[p]) ++assign_mismatches;
        }
        if (assign_mismatches > 0) {
            detail = std::to_string(assign_mismatches) + " superpoint mismatches";
            return false;
        }
    }

    {  // d2s / spatial / temporal values
        Rng rng(mix_seed(3, 5));
        for (int i = 0; i < kInstances; ++i) {
            const Matrix a = unit_rows(rng, 6, 8);
            const Matrix b = unit_rows(rng, 6, 8);
            worst = std::max(worst, std::abs(d2s_loss(a, b).value -
                                             oracles::d2s(oracles::to_rows(a),
                                                          oracles::to_rows(b))));
            const Matrix q = unit_rows(rng, 7, 8);
            const Matrix k = unit_rows(rng, 7, 8);
            worst = std::max(worst, std::abs(spatial_contrastive(q, k, 0.07).value -
                                             oracles::info_nce(oracles::to_rows(q),
                                                               oracles::to_rows(k), 0.07)));
            const Matrix cp = unit_rows(rng, 5, 8);
            const Matrix pv = unit_rows(rng, 5, 8);
            const Matrix cn = unit_rows(rng, 4, 8);
            const Matrix nx = unit_rows(rng, 4, 8);
            worst = std::max(worst,
                             std::abs(temporal_contrastive(cp, pv, cn, nx, 0.07).value -
                                      oracles::temporal(oracles::to_rows(cp), oracles::to_rows(pv),
                                                        oracles::to_rows(cn), oracles::to_rows(nx),
                                                        0.07)));
        }
    }

    detail = "max abs deviation " + num(worst);
    return worst <= 1e-10;
}

// ---------------------------------------------------------------------------
// AC-4: view-consistent superpixels never split or merge a class.
bool ac4(std::string& detail) {
    const auto rig = default_camera_rig();
    long violations = 0;
    long pixels = 0;
    for (int s = 0; s < 50; ++s) {
        const Scene scene = generate_scene(random_scene_spec(mix_seed(0xac4, s)));
        const auto images = render_semantic_images(scene, scene.ego_pose(4.0), 4.0, rig);
        const SuperpixelSet set = build_view_consistent_superpixels(images);
        std::vector<std::int32_t> class_to_id(kDefaultNumClasses, kUnassigned);
        for (std::size_t v = 0; v < images.size(); ++v) {
            for (std::size_t p = 0; p < images[v].class_ids.size(); ++p) {
                ++pixels;
                const std::uint16_t cls = images[v].class_ids[p];
                const std::int32_t id = set.views[v].ids[p];
                if (cls == kSkyClass) {
                    if (id != kUnassigned) ++violations;
                    continue;
                }
                if (id < 0 || id >= set.num_ids() || set.id_class[static_cast<std::size_t>(id)] != cls) {
                    ++violations;
                    continue;
                }
                auto& expected = class_to_id[cls];
                if (expected == kUnassigned)
                    expected = id;
                else if (expected != id)
                    ++violations;
            }
        }
    }
    detail = std::to_string(violations) + " violations over 50 frames (" +
             std::to_string(pixels) + " pixels)";
    return violations == 0;
}

// ---------------------------------------------------------------------------
// AC-5: dense clouds keep the keyframe prefix and agree with labels.
bool ac5(std::string& detail) {
    const auto rig = default_camera_rig();
    const LidarSpec lidar;
    long agree = 0;
    long assigned = 0;
    for (int s = 0; s < 8; ++s) {
        SceneSpec spec = random_scene_spec(mix_seed(0xac5, s));
        spec.dynamic_boxes.clear();  // static world: labels transfer exactly
        const Scene scene = generate_scene(spec);
        const auto triple = sample_sequence(scene, 4.0, 0.5, 2, lidar, rig);
        const FrameBundle& bundle = triple[1];
        const PointCloud dense = build_dense_cloud(bundle);

        Eigen::Index sweep_rows = 0;
        for (const auto& sweep : bundle.sweeps) sweep_rows += sweep.size();
        if (dense.size() != bundle.keyframe.size() + sweep_rows) {
            detail = "cardinality mismatch";
            return false;
        }
        if (!(dense.coords.topRows(bundle.keyframe.size()).array() ==
              bundle.keyframe.coords.array())
                 .all()) {
            detail = "keyframe prefix not bit-identical";
            return false;
        }
        for (Eigen::Index i = 0; i < bundle.keyframe.size(); ++i)
            if (dense.labels[static_cast<std::size_t>(i)] !=
                bundle.keyframe.labels[static_cast<std::size_t>(i)]) {
                detail = "keyframe label prefix mismatch";
                return false;
            }

        const SuperpixelSet set = build_view_consistent_superpixels(bundle.images);
        const auto assignment = propagate_dense_superpoints(dense, set, bundle.calibrations);
        for (Eigen::Index i = 0; i < dense.size(); ++i) {
            const std::int32_t id = assignment.point_ids[static_cast<std::size_t>(i)];
            if (id == kUnassigned) continue;
            ++assigned;
            if (set.id_class[static_cast<std::size_t>(id)] ==
                dense.labels[static_cast<std::size_t>(i)])
                ++agree;
        }
    }
    const double fraction = assigned > 0 ? static_cast<double>(agree) / assigned : 0.0;
    detail = "label agreement " + num(100.0 * fraction) + "% over " +
             std::to_string(assigned) + " assigned points";
    return assigned > 500 && fraction >= 0.95;
}

// ---------------------------------------------------------------------------
// AC-6: the default pretraining run at least halves its total loss.
bool ac6(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    PretrainData data;
    for (int i = 0; i < 32; ++i)
        data.scene_specs.push_back(random_scene_spec(mix_seed(2026, static_cast<std::uint64_t>(i))));
    data.lidar = LidarSpec{};
    data.rig = default_camera_rig();
    data.keyframe_times = {2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};

    TrainConfig config;
    config.seed = 2026;
    config.steps = 2000;
    const Checkpoint result = run_pretraining(config, data);
    const double elapsed = seconds_since(start);

    double first = -1.0, last = -1.0;
    for (const auto& rec : result.history) {
        if (rec.skipped) continue;
        if (first < 0.0) first = rec.total;
        last = rec.total;
    }
    detail = "total " + num(first) + " -> " + num(last) + ", " + num(elapsed) + " s";
    return first > 0.0 && std::isfinite(last) && last <= 0.5 * first && elapsed < 300.0;
}

// ---------------------------------------------------------------------------
// Shared probe protocol for AC-7/AC-8.
struct ProbeSetup {
    PretrainData data;
    std::vector<PointCloud> train;
    std::vector<PointCloud> eval;
};

ProbeSetup probe_setup(std::uint64_t seed, int scenes) {
    ProbeSetup setup;
    LidarSpec lidar;
    lidar.num_beams = 8;
    lidar.azimuth_steps = 90;
    setup.data.lidar = lidar;
    setup.data.rig = camera_rig(2);
    setup.data.keyframe_times = {2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
    for (int i = 0; i < scenes; ++i) {
        const SceneSpec spec = random_scene_spec(mix_seed(seed, 0xda7a + static_cast<std::uint64_t>(i)));
        setup.data.scene_specs.push_back(spec);
        const Scene scene = generate_scene(spec);
        for (const double t : setup.data.keyframe_times) {
            PointCloud cloud = scan_lidar(scene, scene.ego_pose(t), t, lidar);
            (i % 2 == 0 ? setup.train : setup.eval).push_back(std::move(cloud));
        }
    }
    return setup;
}

double probe_miou(const PointEncoderParams& encoder, const ProbeSetup& setup) {
    return linear_probe(encoder, setup.train, setup.eval, kDefaultNumClasses).scores.miou;
}

bool ac7(std::string& detail) {
    double gap_sum = 0.0;
    std::string parts;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const ProbeSetup setup = probe_setup(seed, 8);
        TrainConfig config;
        config.seed = seed;
        config.steps = 500;
        config.num_sweeps = 1;
        const Checkpoint trained = run_pretraining(config, setup.data);
        const Checkpoint random_init = init_trainer(config, kDefaultNumClasses, 1);
        const double gap = probe_miou(trained.model.encoder, setup) -
                           probe_miou(random_init.model.encoder, setup);
        gap_sum += gap;
        if (!parts.empty()) parts += ", ";
        parts += num(gap);
    }
    const double mean = gap_sum / 3.0;
    detail = "gaps " + parts + ", mean " + num(mean);
    return mean >= 0.05;
}

bool ac8(std::string& detail) {
    double with_sum = 0.0, without_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const ProbeSetup setup = probe_setup(seed + 100, 4);
        TrainConfig config;
        config.seed = seed;
        config.steps = 200;
        config.num_sweeps = 1;
        config.enable_d2s = false;

        TrainConfig with_fcl = config;
        with_fcl.enable_fcl = true;
        TrainConfig without_fcl = config;
        without_fcl.enable_fcl = false;

        with_sum += probe_miou(run_pretraining(with_fcl, setup.data).model.encoder, setup);
        without_sum +=
            probe_miou(run_pretraining(without_fcl, setup.data).model.encoder, setup);
    }
    detail = "mean mIoU with FCL " + num(with_sum / 3.0) + " vs without " +
             num(without_sum / 3.0);
    return with_sum / 3.0 > without_sum / 3.0;
}

// ---------------------------------------------------------------------------
// AC-9: evaluation metric hand examples.
bool ac9(std::string& detail) {
    bool pass = true;

    ConfusionMatrix cm(2);
    for (int i = 0; i < 5; ++i) cm.add(0, 0);
    for (int i = 0; i < 5; ++i) cm.add(0, 1);
    for (int i = 0; i < 10; ++i) cm.add(1, 1);
    const IouSummary summary = iou_from_confusion(cm);
    pass = pass && std::abs(summary.iou[0] - 0.5) <= 1e-12;
    pass = pass && std::abs(summary.iou[1] - 10.0 / 15.0) <= 1e-12;
    pass = pass && std::abs(summary.miou - 0.5 * (0.5 + 10.0 / 15.0)) <= 1e-12;

    ConfusionMatrix diag(3);
    diag.add(0, 0);
    diag.add(1, 1);
    const IouSummary ds = iou_from_confusion(diag);
    pass = pass && ds.miou == 1.0 && ds.defined[2] == 0;

    const std::array<double, 3> s = {0.5, 0.4, 0.3};
    pass = pass && ce_rr(s, s, 0.6).ce == 1.0;
    pass = pass && ce_rr({0.6, 0.6, 0.6}, s, 0.6).rr == 1.0;
    const CeRr hand = ce_rr({0.5, 0.4, 0.3}, {0.4, 0.3, 0.2}, 0.5);
    pass = pass && std::abs(hand.ce - 1.8 / 2.1) <= 1e-12;
    pass = pass && std::abs(hand.rr - 1.2 / 1.5) <= 1e-12;
    pass = pass && !ce_rr(s, {1.0, 1.0, 1.0}, 0.5).ce_defined;
    pass = pass && !ce_rr(s, {0.4, 0.4, 0.4}, 0.0).rr_defined;

    detail = "confusion/IoU/CE/RR hand values, exactness of the self cases";
    return pass;
}

// ---------------------------------------------------------------------------
// AC-10: bitwise determinism, file round-trips, corruption detection.
bool ac10(std::string& detail) {
    const fs::path work = fs::temp_directory_path() / "superflow_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    // Training determinism, including serialized bytes.
    PretrainData data;
    data.scene_specs = {random_scene_spec(mix_seed(0xac10, 0)),
                        random_scene_spec(mix_seed(0xac10, 1))};
    LidarSpec lidar;
    lidar.num_beams = 4;
    lidar.azimuth_steps = 45;
    data.lidar = lidar;
    data.rig = camera_rig(2);
    data.keyframe_times = {3.0, 4.0, 5.0};
    TrainConfig config;
    config.seed = 10;
    config.steps = 5;
    config.num_sweeps = 1;
    const Checkpoint run_a = run_pretraining(config, data);
    const Checkpoint run_b = run_pretraining(config, data);
    if (!same_history(run_a.history, run_b.history) ||
        !same_matrix(run_a.model.encoder.w1, run_b.model.encoder.w1)) {
        detail = "two identical runs diverged";
        return false;
    }
    write_checkpoint(work / "a.sfck", run_a);
    write_checkpoint(work / "b.sfck", run_b);
    if (slurp(work / "a.sfck") != slurp(work / "b.sfck")) {
        detail = "checkpoint bytes differ between identical runs";
        return false;
    }

    // Checkpoint round-trip is byte-stable.
    const Checkpoint reloaded = read_checkpoint(work / "a.sfck");
    write_checkpoint(work / "a2.sfck", reloaded);
    if (slurp(work / "a.sfck") != slurp(work / "a2.sfck")) {
        detail = "checkpoint round-trip changed bytes";
        return false;
    }

    // Dataset synthesis determinism.
    SynthOptions options;
    options.seed = 31;
    options.scenes = 1;
    options.cameras = 1;
    options.beams = 4;
    write_dataset(work / "ds_a", options);
    write_dataset(work / "ds_b", options);
    for (const auto& entry : fs::recursive_directory_iterator(work / "ds_a")) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), work / "ds_a");
        if (slurp(entry.path()) != slurp(work / "ds_b" / rel)) {
            detail = "dataset trees differ at " + rel.string();
            return false;
        }
    }

    // Cloud round-trip, then corruption detection on both blob kinds.
    const Dataset ds = load_dataset(work / "ds_a");
    const fs::path cloud_path = work / "ds_a" / ds.scenes[0].cloud_paths[0];
    const PointCloud cloud = read_cloud_blob(cloud_path);
    write_cloud_blob(work / "cloud_copy.sfpc", cloud);
    if (slurp(cloud_path) != slurp(work / "cloud_copy.sfpc")) {
        detail = "cloud round-trip changed bytes";
        return false;
    }

    int caught = 0;
    for (const fs::path& victim : {work / "a.sfck", work / "cloud_copy.sfpc"}) {
        auto bytes = slurp(victim);
        bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x04);
        std::ofstream out(victim, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        try {
            if (victim.extension() == ".sfck")
                (void)read_checkpoint(victim);
            else
                (void)read_cloud_blob(victim);
        } catch (const IoError&) {
            ++caught;
        }
    }
    if (caught != 2) {
        detail = "corruption went undetected";
        return false;
    }

    detail = "runs, blobs, and datasets byte-stable; corruption detected";
    return true;
}

}  // namespace

int main() {
    std::cout << std::boolalpha;
    criterion(1, "analytic gradients vs finite differences (tol 1e-5, < 10 s)", ac1);
    criterion(2, "loss closed forms (tol 1e-12 / 1e-10)", ac2);
    criterion(3, "scalar-oracle equivalence, 100 instances per op (tol 1e-10)", ac3);
    criterion(4, "view-consistent superpixels, zero violations on 50 frames", ac4);
    criterion(5, "dense cloud prefix/cardinality and >= 95% label agreement", ac5);
    criterion(6, "default pretraining halves the total loss (< 300 s)", ac6);
    criterion(7, "probe transfer gap >= 0.05 mean over 3 seeds", ac7);
    criterion(8, "temporal term strictly improves mean probe mIoU", ac8);
    criterion(9, "evaluation metric hand examples (tol 1e-12)", ac9);
    criterion(10, "bitwise determinism, round-trips, corruption detection", ac10);

    if (failures == 0) {
        std::cout << "acceptance: all criteria passed" << std::endl;
        return 0;
    }
    std::cout << "acceptance: " << failures << " criteria failed" << std::endl;
    return 1;
}
