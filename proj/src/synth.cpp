#include "superflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "superflow/rng.hpp"

namespace superflow {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRayEps = 1e-9;

double deg2rad(double d) { return d * kPi / 180.0; }

/// Smallest s > kRayEps at which origin + s*dir enters the box, if any.
/// Rays starting inside a box are treated as misses.
std::optional<double> ray_box_entry(const Vec3& origin, const Vec3& dir, const Vec3& lo,
                                    const Vec3& hi) {
    double s_enter = -std::numeric_limits<double>::infinity();
    double s_exit = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dir[a]) < 1e-15) {
            if (origin[a] < lo[a] || origin[a] > hi[a]) return std::nullopt;
            continue;
        }
        const double inv = 1.0 / dir[a];
        double s0 = (lo[a] - origin[a]) * inv;
        double s1 = (hi[a] - origin[a]) * inv;
        if (s0 > s1) std::swap(s0, s1);
        s_enter = std::max(s_enter, s0);
        s_exit = std::min(s_exit, s1);
        if (s_enter > s_exit) return std::nullopt;
    }
    if (s_enter > kRayEps) return s_enter;
    return std::nullopt;
}

struct RayHit {
    double s = 0.0;
    std::uint16_t class_id = 0;
};

std::optional<RayHit> cast_ray(const Vec3& origin, const Vec3& dir, bool ground_plane,
                               std::uint16_t ground_class, const std::vector<LabeledBox>& boxes,
                               double max_s) {
    std::optional<RayHit> best;
    if (ground_plane && std::abs(dir.z()) > 1e-15) {
        const double s = -origin.z() / dir.z();
        if (s > kRayEps && s <= max_s) best = RayHit{s, ground_class};
    }
    for (const auto& box : boxes) {
        const Vec3 lo = box.center - box.half_extent;
        const Vec3 hi = box.center + box.half_extent;
        if (auto s = ray_box_entry(origin, dir, lo, hi)) {
            if (*s <= max_s && (!best || *s < best->s)) best = RayHit{*s, box.class_id};
        }
    }
    return best;
}

}  // namespace

bool EgoTrajectory::contains(double t) const {
    if (times.empty()) return false;
    return t >= times.front() && t <= times.back();
}

RigidTransform EgoTrajectory::pose_at(double t) const {
    if (!contains(t)) throw std::invalid_argument("trajectory query outside span");
    if (times.size() == 1) return RigidTransform::from_yaw(yaws[0], positions[0]);
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t hi = std::min<std::size_t>(
        std::max<std::ptrdiff_t>(1, it - times.begin()), times.size() - 1);
    const std::size_t lo = hi - 1;
    const double span = times[hi] - times[lo];
    const double w = span > 0.0 ? (t - times[lo]) / span : 0.0;
    const Vec3 p = (1.0 - w) * positions[lo] + w * positions[hi];
    const double yaw = (1.0 - w) * yaws[lo] + w * yaws[hi];
    return RigidTransform::from_yaw(yaw, p);
}

double LidarSpec::beam_elevation(int beam) const {
    if (num_beams == 1) return 0.0;
    const double half = 0.5 * deg2rad(vertical_fov_deg);
    return -half + 2.0 * half * static_cast<double>(beam) / (num_beams - 1);
}

Scene::Scene(SceneSpec spec) : spec_(std::move(spec)) {}

std::vector<LabeledBox> Scene::boxes_at(double t) const {
    std::vector<LabeledBox> out = spec_.static_boxes;
    for (auto& box : out) box.velocity = Vec3::Zero();
    for (const auto& dyn : spec_.dynamic_boxes) {
        LabeledBox box = dyn;
        box.center = dyn.center_at(t);
        box.velocity = Vec3::Zero();
        out.push_back(box);
    }
    return out;
}

Scene generate_scene(const SceneSpec& spec) {
    if (spec.num_classes < 2) throw std::invalid_argument("scene needs at least two classes");
    if (!spec.ground_plane && spec.static_boxes.empty() && spec.dynamic_boxes.empty())
        throw std::invalid_argument("scene has no geometry");
    if (spec.ground_plane && spec.ground_class >= spec.num_classes)
        throw std::invalid_argument("ground class out of range");
    auto check_boxes = [&spec](const std::vector<LabeledBox>& boxes) {
        for (const auto& box : boxes) {
            if (box.class_id >= spec.num_classes)
                throw std::invalid_argument("box class out of range");
            if ((box.half_extent.array() <= 0.0).any())
                throw std::invalid_argument("box extent must be positive");
        }
    };
    check_boxes(spec.static_boxes);
    check_boxes(spec.dynamic_boxes);
    const auto& traj = spec.trajectory;
    if (traj.times.empty()) throw std::invalid_argument("trajectory is empty");
    if (traj.positions.size() != traj.times.size() || traj.yaws.size() != traj.times.size())
        throw std::invalid_argument("trajectory arrays disagree in length");
    for (std::size_t i = 1; i < traj.times.size(); ++i)
        if (traj.times[i] <= traj.times[i - 1])
            throw std::invalid_argument("trajectory times must increase");
    return Scene(spec);
}

SceneSpec random_scene_spec(std::uint64_t seed, int num_classes) {
    if (num_classes < 2) throw std::invalid_argument("need at least ground + one class");
    Rng rng(mix_seed(seed, 0xa11ce));
    SceneSpec spec;
    spec.seed = seed;
    spec.num_classes = num_classes;
    spec.ground_plane = true;
    spec.ground_class = 0;

    const double speed = rng.uniform(1.5, 2.5);
    const double y0 = rng.uniform(-0.5, 0.5);
    const double end_yaw = rng.uniform(-0.06, 0.06);
    spec.trajectory.times = {0.0, 5.0, 10.0};
    spec.trajectory.positions = {Vec3(0.0, y0, 1.8), Vec3(5.0 * speed, y0, 1.8),
                                 Vec3(10.0 * speed, y0 + rng.uniform(-0.4, 0.4), 1.8)};
    spec.trajectory.yaws = {0.0, 0.5 * end_yaw, end_yaw};
    const double reach = 10.0 * speed;

    auto add_box = [&spec](std::uint16_t cls, const Vec3& center, const Vec3& half,
                           const Vec3& vel = Vec3::Zero()) {
        if (cls >= spec.num_classes) return;
        LabeledBox box;
        box.center = center;
        box.half_extent = half;
        box.velocity = vel;
        box.class_id = cls;
        if (vel.isZero())
            spec.static_boxes.push_back(box);
        else
            spec.dynamic_boxes.push_back(box);
    };

    const int num_buildings = 2 + static_cast<int>(rng.uniform_int(2));
    for (int i = 0; i < num_buildings; ++i) {
        const double side = (i % 2 == 0) ? 1.0 : -1.0;
        const Vec3 half(rng.uniform(1.5, 3.0), rng.uniform(1.5, 3.0), rng.uniform(2.0, 4.0));
        add_box(1, Vec3(rng.uniform(2.0, reach + 5.0), side * rng.uniform(5.5, 9.0), half.z()),
                half);
    }
    for (int i = 0; i < 2; ++i) {
        const double side = (i == 0) ? 1.0 : -1.0;
        add_box(5, Vec3(rng.uniform(3.0, reach), side * rng.uniform(3.2, 3.8), 0.5),
                Vec3(rng.uniform(1.5, 2.5), 0.15, 0.5));
    }
    for (int i = 0; i < 2; ++i) {
        const double side = rng.uniform01() < 0.5 ? 1.0 : -1.0;
        const double h = rng.uniform(0.6, 1.2);
        add_box(4, Vec3(rng.uniform(2.0, reach + 3.0), side * rng.uniform(4.2, 5.2), h),
                Vec3(h, h, h));
    }
    const int num_vehicles = 1 + static_cast<int>(rng.uniform_int(2));
    for (int i = 0; i < num_vehicles; ++i) {
        const double vx = rng.uniform(0.8, 2.2) * (rng.uniform01() < 0.5 ? -1.0 : 1.0);
        add_box(2, Vec3(rng.uniform(6.0, reach + 8.0), rng.uniform(-2.2, 2.2), 0.8),
                Vec3(2.0, 0.9, 0.8), Vec3(vx, 0.0, 0.0));
    }
    const int num_pedestrians = 1 + static_cast<int>(rng.uniform_int(2));
    for (int i = 0; i < num_pedestrians; ++i) {
        const double side = rng.uniform01() < 0.5 ? 1.0 : -1.0;
        add_box(3, Vec3(rng.uniform(3.0, reach + 4.0), side * rng.uniform(2.5, 4.5), 0.9),
                Vec3(0.3, 0.3, 0.9), Vec3(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), 0.0));
    }
    return spec;
}

std::vector<CameraCalibration> camera_rig(int num_cameras) {
    if (num_cameras < 1) throw std::invalid_argument("rig needs at least one camera");
    // Optical frame: z forward, x right, y down. For yaw 0 this maps the
    // sensor's +x (forward) onto +z.
    Mat3 forward;
    forward << 0.0, -1.0, 0.0,
               0.0, 0.0, -1.0,
               1.0, 0.0, 0.0;
    std::vector<CameraCalibration> rig;
    for (int cam = 0; cam < num_cameras; ++cam) {
        const double yaw_deg =
            num_cameras == 1 ? 0.0 : -60.0 + 120.0 * cam / (num_cameras - 1);
        const double yaw = deg2rad(yaw_deg);
        const Vec3 center(0.2 * std::cos(yaw), 0.2 * std::sin(yaw), 0.0);
        CameraCalibration calib;
        calib.intrinsics = CameraIntrinsics{160.0, 160.0, 112.0, 112.0};
        calib.height = 224;
        calib.width = 224;
        calib.extrinsic.rotation = forward * RigidTransform::from_yaw(-yaw).rotation;
        calib.extrinsic.translation = -(calib.extrinsic.rotation * center);
        rig.push_back(calib);
    }
    return rig;
}

std::vector<CameraCalibration> default_camera_rig() { return camera_rig(3); }

PointCloud scan_lidar(const Scene& scene, const RigidTransform& ego_pose, double t,
                      const LidarSpec& lidar) {
    if (!scene.in_span(t)) throw std::invalid_argument("scan time outside trajectory span");
    if (lidar.num_beams < 1 || lidar.azimuth_steps < 1 || lidar.max_range <= 0.0)
        throw std::invalid_argument("bad lidar spec");
    const RigidTransform& pose = ego_pose;
    const std::vector<LabeledBox> boxes = scene.boxes_at(t);
    const auto& spec = scene.spec();

    std::vector<Vec3> points;
    std::vector<std::uint16_t> labels;
    points.reserve(static_cast<std::size_t>(lidar.num_beams) * lidar.azimuth_steps / 2);
    for (int beam = 0; beam < lidar.num_beams; ++beam) {
        const double elev = lidar.beam_elevation(beam);
        const double ce = std::cos(elev), se = std::sin(elev);
        for (int step = 0; step < lidar.azimuth_steps; ++step) {
            const double az = 2.0 * kPi * step / lidar.azimuth_steps;
            const Vec3 dir_sensor(ce * std::cos(az), ce * std::sin(az), se);
            const Vec3 dir_world = pose.rotation * dir_sensor;
            const auto hit = cast_ray(pose.translation, dir_world, spec.ground_plane,
                                      spec.ground_class, boxes, lidar.max_range);
            if (!hit) continue;
            points.push_back(hit->s * dir_sensor);
            labels.push_back(hit->class_id);
        }
    }

    PointCloud cloud;
    const Eigen::Index n = static_cast<Eigen::Index>(points.size());
    cloud.coords.resize(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) cloud.coords.row(i) = points[i].transpose();
    cloud.feats = Matrix::Ones(n, 1);
    cloud.labels = std::move(labels);
    cloud.timestamp = t;
    return cloud;
}

std::vector<SemanticImage> render_semantic_images(const Scene& scene,
                                                  const RigidTransform& ego_pose, double t,
                                                  const std::vector<CameraCalibration>& rig) {
    if (!scene.in_span(t)) throw std::invalid_argument("render time outside trajectory span");
    const RigidTransform& ego = ego_pose;
    const std::vector<LabeledBox> boxes = scene.boxes_at(t);
    const auto& spec = scene.spec();
    constexpr double kNoLimit = std::numeric_limits<double>::infinity();

    std::vector<SemanticImage> images;
    images.reserve(rig.size());
    for (const auto& calib : rig) {
        const RigidTransform cam_to_world = compose(ego, invert(calib.extrinsic));
        const auto& k = calib.intrinsics;
        SemanticImage image;
        image.height = calib.height;
        image.width = calib.width;
        image.class_ids.assign(static_cast<std::size_t>(calib.height) * calib.width, kSkyClass);
        for (int row = 0; row < calib.height; ++row) {
            for (int col = 0; col < calib.width; ++col) {
                const Vec3 dir_cam((col + 0.5 - k.cx) / k.fx, (row + 0.5 - k.cy) / k.fy, 1.0);
                const Vec3 dir_world = cam_to_world.rotation * dir_cam;
                const auto hit = cast_ray(cam_to_world.translation, dir_world, spec.ground_plane,
                                          spec.ground_class, boxes, kNoLimit);
                if (hit) image.at(row, col) = hit->class_id;
            }
        }
        images.push_back(std::move(image));
    }
    return images;
}

std::vector<FrameBundle> sample_sequence(const Scene& scene, double center_time, double dt,
                                         int num_sweeps, const LidarSpec& lidar,
                                         const std::vector<CameraCalibration>& rig) {
    if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
    if (num_sweeps < 0) throw std::invalid_argument("negative sweep count");
    if (lidar.sweep_hz <= 0.0) throw std::invalid_argument("bad sweep rate");
    const double sweep_dt = 1.0 / lidar.sweep_hz;
    const double keyframe_times[3] = {center_time - dt, center_time, center_time + dt};
    for (const double kt : keyframe_times) {
        if (!scene.in_span(kt) || !scene.in_span(kt - num_sweeps * sweep_dt))
            throw std::invalid_argument("sequence window outside trajectory span");
    }

    std::vector<FrameBundle> bundles;
    bundles.reserve(3);
    for (const double kt : keyframe_times) {
        FrameBundle bundle;
        bundle.timestamp = kt;
        bundle.ego_pose = scene.ego_pose(kt);
        bundle.keyframe = scan_lidar(scene, bundle.ego_pose, kt, lidar);
        const RigidTransform world_to_key = invert(bundle.ego_pose);
        for (int k = 1; k <= num_sweeps; ++k) {
            const double st = kt - k * sweep_dt;
            bundle.sweeps.push_back(scan_lidar(scene, scene.ego_pose(st), st, lidar));
            bundle.sweep_to_key.push_back(compose(world_to_key, scene.ego_pose(st)));
        }
        bundle.images = render_semantic_images(scene, bundle.ego_pose, kt, rig);
        bundle.calibrations = rig;
        bundles.push_back(std::move(bundle));
    }
    return bundles;
}

}  // namespace superflow
