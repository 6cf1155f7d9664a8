#pragma once

// Quaternion and rigid-pose algebra.
//
// Conventions used throughout the project (and in the manifest format):
//  * quaternions are stored (w, x, y, z) and, as dataset labels, are unit
//    with w >= 0 (see canonicalize);
//  * a Pose is camera-to-world: a point p_cam in the camera frame lands at
//    orientation * p_cam + position in the world.

#include <array>

namespace uwpose {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;  // row-major

struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quaternion identity() { return {}; }
  bool operator==(const Quaternion&) const = default;
};

struct RigidTransform {
  Quaternion rotation;
  Vec3 translation{0.0, 0.0, 0.0};

  static RigidTransform identity() { return {}; }
};

struct Pose {
  Vec3 position{0.0, 0.0, 0.0};
  Quaternion orientation;
};

double dot(const Quaternion& a, const Quaternion& b);
double norm(const Quaternion& q);

// Throws DegenerateQuaternionError when |q| <= 1e-12.
Quaternion normalize(const Quaternion& q);
// Picks the representative with w > 0; when w == 0 the first nonzero of
// (x, y, z) is made positive. Idempotent.
Quaternion canonicalize(const Quaternion& q);
Quaternion conjugate(const Quaternion& q);
// Hamilton product; rotate(a * b, v) == rotate(a, rotate(b, v)).
Quaternion multiply(const Quaternion& a, const Quaternion& b);
Vec3 rotate(const Quaternion& q, const Vec3& v);

Quaternion from_axis_angle(const Vec3& axis, double angle_rad);
Mat3 to_rotation_matrix(const Quaternion& q);
Quaternion from_rotation_matrix(const Mat3& r);

// Geodesic rotation angle between the two orientations, in degrees, within
// [0, 180]. q_pred is normalized first; sign of either argument is ignored.
double angular_error_deg(const Quaternion& q_true, const Quaternion& q_pred);

// compose(a, b) applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& t);
Vec3 apply(const RigidTransform& t, const Vec3& p);

RigidTransform to_transform(const Pose& pose);
Pose to_pose(const RigidTransform& t);

// World pose of the right camera given the left camera's world pose and the
// left->right extrinsic (pose of the right camera in the left camera frame).
Pose right_camera_pose(const Pose& left, const RigidTransform& left_to_right);

}  // namespace uwpose
