#include "superflow/geometry.hpp"

#include <cmath>

namespace superflow {

RigidTransform RigidTransform::from_yaw(double yaw, const Vec3& translation) {
    RigidTransform t;
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    t.rotation << c, -s, 0.0,
                  s,  c, 0.0,
                  0.0, 0.0, 1.0;
    t.translation = translation;
    return t;
}

bool RigidTransform::is_rigid(double tol) const {
    const Mat3 gram = rotation.transpose() * rotation;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

RigidTransform invert(const RigidTransform& t) {
    RigidTransform out;
    out.rotation = t.rotation.transpose();
    out.translation = -(out.rotation * t.translation);
    return out;
}

std::optional<PixelProjection> project_point(const Vec3& point,
                                             const CameraCalibration& calib) {
    const Vec3 cam = calib.extrinsic.apply(point);
    if (cam.z() <= kMinDepth) return std::nullopt;
    const double u = calib.intrinsics.fx * cam.x() / cam.z() + calib.intrinsics.cx;
    const double v = calib.intrinsics.fy * cam.y() / cam.z() + calib.intrinsics.cy;
    if (u < 0.0 || u >= static_cast<double>(calib.width)) return std::nullopt;
    if (v < 0.0 || v >= static_cast<double>(calib.height)) return std::nullopt;
    return PixelProjection{u, v, cam.z()};
}

Matrix transform_points(const Matrix& points, const RigidTransform& transform) {
    Matrix out = points * transform.rotation.transpose();
    out.rowwise() += transform.translation.transpose();
    return out;
}

}  // namespace superflow
