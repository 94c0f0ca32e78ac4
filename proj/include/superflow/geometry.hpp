#pragma once

#include <Eigen/Dense>
#include <optional>

namespace superflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Smallest camera-frame depth accepted by the projection. The perspective
/// divide is singular at z = 0.
inline constexpr double kMinDepth = 1e-9;

/// Proper rigid motion p -> R*p + t. The rotation must stay orthonormal
/// with determinant +1.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    /// Rotation about the +z axis by `yaw` radians, then translation.
    static RigidTransform from_yaw(double yaw, const Vec3& translation = Vec3::Zero());

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    /// True when the rotation block is orthonormal with det +1 within `tol`.
    bool is_rigid(double tol = 1e-9) const;
};

/// compose(a, b) applied to p equals a.apply(b.apply(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// Group inverse: compose(invert(t), t) is the identity.
RigidTransform invert(const RigidTransform& t);

struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
};

struct CameraCalibration {
    CameraIntrinsics intrinsics;
    RigidTransform extrinsic;  // LiDAR frame -> camera frame
    int height = 0;            // pixels
    int width = 0;
};

/// Continuous pixel coordinates plus camera-frame depth of an accepted
/// projection. u runs along image columns, v along rows.
struct PixelProjection {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

/// Pinhole projection of a LiDAR-frame point. Applies the extrinsic,
/// divides by camera-frame z, then applies the intrinsics. Returns empty
/// when the depth is <= kMinDepth or (u, v) falls outside the half-open
/// image ranges [0, W) x [0, H).
std::optional<PixelProjection> project_point(const Vec3& point,
                                             const CameraCalibration& calib);

/// Applies the transform to each row of an N x 3 point matrix.
Matrix transform_points(const Matrix& points, const RigidTransform& transform);

}  // namespace superflow
