#pragma once

#include <cstdint>
#include <vector>

#include "superflow/geometry.hpp"

namespace superflow {

/// Class id rendered for pixels whose ray escapes the scene.
inline constexpr std::uint16_t kSkyClass = 0xFFFF;

/// Default semantic palette used by random_scene_spec:
/// 0 ground, 1 building, 2 vehicle, 3 pedestrian, 4 vegetation, 5 barrier.
inline constexpr int kDefaultNumClasses = 6;

/// Axis-aligned box with a semantic class; dynamic boxes carry a constant
/// velocity applied to the center, extents are half-widths.
struct LabeledBox {
    Vec3 center = Vec3::Zero();
    Vec3 half_extent = Vec3::Ones();
    Vec3 velocity = Vec3::Zero();  // m/s, zero for static geometry
    std::uint16_t class_id = 0;

    Vec3 center_at(double t) const { return center + velocity * t; }
};

/// Piecewise-linear ego pose: position and yaw interpolated between knots.
struct EgoTrajectory {
    std::vector<double> times;
    std::vector<Vec3> positions;
    std::vector<double> yaws;

    bool contains(double t) const;
    RigidTransform pose_at(double t) const;  // sensor -> world
    double start() const { return times.front(); }
    double end() const { return times.back(); }
};

struct SceneSpec {
    std::uint64_t seed = 0;
    int num_classes = kDefaultNumClasses;
    bool ground_plane = true;
    std::uint16_t ground_class = 0;
    std::vector<LabeledBox> static_boxes;   // velocities ignored
    std::vector<LabeledBox> dynamic_boxes;  // constant velocity
    EgoTrajectory trajectory;
};

struct LidarSpec {
    int num_beams = 16;
    int azimuth_steps = 180;
    double vertical_fov_deg = 30.0;  // full aperture, symmetric about horizon
    double max_range = 60.0;
    double sweep_hz = 20.0;

    double beam_elevation(int beam) const;  // radians
};

/// Columns of `feats` are per-point channels (channel 0 is intensity).
struct PointCloud {
    Matrix coords;                     // N x 3, sensor frame
    Matrix feats;                      // N x C
    std::vector<std::uint16_t> labels; // N semantic ids
    double timestamp = 0.0;

    Eigen::Index size() const { return coords.rows(); }
    Eigen::Index num_channels() const { return feats.cols(); }
};

struct SemanticImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint16_t> class_ids;  // row-major H*W

    std::uint16_t at(int row, int col) const {
        return class_ids[static_cast<std::size_t>(row) * width + col];
    }
    std::uint16_t& at(int row, int col) {
        return class_ids[static_cast<std::size_t>(row) * width + col];
    }
};

/// One keyframe with its history sweeps and the synchronized camera views.
struct FrameBundle {
    PointCloud keyframe;
    std::vector<PointCloud> sweeps;          // each strictly older than keyframe
    std::vector<RigidTransform> sweep_to_key; // aligns sweep i into keyframe frame
    std::vector<SemanticImage> images;       // one per rig camera
    std::vector<CameraCalibration> calibrations;
    RigidTransform ego_pose;                 // sensor -> world at keyframe time
    double timestamp = 0.0;
};

/// Validated scene; query geometry at any time inside the trajectory span.
class Scene {
  public:
    Scene() = default;
    explicit Scene(SceneSpec spec);

    const SceneSpec& spec() const { return spec_; }
    std::vector<LabeledBox> boxes_at(double t) const;
    RigidTransform ego_pose(double t) const { return spec_.trajectory.pose_at(t); }
    bool in_span(double t) const { return spec_.trajectory.contains(t); }

  private:
    SceneSpec spec_;
};

/// Validates and wraps a spec; throws std::invalid_argument on an empty or
/// inconsistent description.
Scene generate_scene(const SceneSpec& spec);

/// Procedurally places buildings, barriers, vegetation and moving
/// vehicles/pedestrians around a straight 10 s ego run.
SceneSpec random_scene_spec(std::uint64_t seed, int num_classes = kDefaultNumClasses);

/// 224x224 cameras, fx=fy=160, offset 0.2 m radially from the sensor
/// origin, yaws spread evenly across [-60, +60] degrees (a single camera
/// faces forward).
std::vector<CameraCalibration> camera_rig(int num_cameras);

/// The three-camera rig at yaw -60/0/+60 deg.
std::vector<CameraCalibration> default_camera_rig();

/// Casts one sweep from the given ego pose against the scene at time t.
/// Points are in the sensor frame, ordered beam-major. Feature channel 0 is
/// intensity (constant 1).
PointCloud scan_lidar(const Scene& scene, const RigidTransform& ego_pose, double t,
                      const LidarSpec& lidar);

/// Renders per-pixel semantic ids through each camera at time t.
std::vector<SemanticImage> render_semantic_images(const Scene& scene,
                                                  const RigidTransform& ego_pose, double t,
                                                  const std::vector<CameraCalibration>& rig);

/// Builds the (t - dt, t, t + dt) keyframe bundles, each with `num_sweeps`
/// preceding sweeps registered into its keyframe via the ego motion.
std::vector<FrameBundle> sample_sequence(const Scene& scene, double center_time, double dt,
                                         int num_sweeps, const LidarSpec& lidar,
                                         const std::vector<CameraCalibration>& rig);

}  // namespace superflow
