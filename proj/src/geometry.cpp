#include "uwpose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uwpose/errors.hpp"

namespace uwpose {

double dot(const Quaternion& a, const Quaternion& b) { return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z; }

double norm(const Quaternion& q) { return std::sqrt(dot(q, q)); }

Quaternion normalize(const Quaternion& q) {
  const double n = norm(q);
  if (!(n > 1e-12)) throw DegenerateQuaternionError("cannot normalize quaternion with norm " + std::to_string(n));
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quaternion canonicalize(const Quaternion& q) {
  double lead = q.w;
  if (lead == 0.0) lead = q.x != 0.0 ? q.x : (q.y != 0.0 ? q.y : q.z);
  if (lead < 0.0) return {-q.w, -q.x, -q.y, -q.z};
  return q;
}

Quaternion conjugate(const Quaternion& q) { return {q.w, -q.x, -q.y, -q.z}; }

Quaternion multiply(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Vec3 rotate(const Quaternion& q, const Vec3& v) {
  // v' = v + 2w (u x v) + 2 u x (u x v), u = (x, y, z)
  const Vec3 u{q.x, q.y, q.z};
  const Vec3 t{2.0 * (u[1] * v[2] - u[2] * v[1]), 2.0 * (u[2] * v[0] - u[0] * v[2]),
               2.0 * (u[0] * v[1] - u[1] * v[0])};
  return {v[0] + q.w * t[0] + (u[1] * t[2] - u[2] * t[1]), v[1] + q.w * t[1] + (u[2] * t[0] - u[0] * t[2]),
          v[2] + q.w * t[2] + (u[0] * t[1] - u[1] * t[0])};
}

Quaternion from_axis_angle(const Vec3& axis, double angle_rad) {
  const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (!(n > 0.0)) throw DegenerateQuaternionError("rotation axis has zero length");
  const double s = std::sin(0.5 * angle_rad) / n;
  return {std::cos(0.5 * angle_rad), axis[0] * s, axis[1] * s, axis[2] * s};
}

Mat3 to_rotation_matrix(const Quaternion& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

Quaternion from_rotation_matrix(const Mat3& r) {
  // Shepperd: branch on the largest of (trace, diagonal) for stability.
  const double trace = r[0][0] + r[1][1] + r[2][2];
  Quaternion q;
  if (trace >= r[0][0] && trace >= r[1][1] && trace >= r[2][2]) {
    const double s = 2.0 * std::sqrt(1.0 + trace);
    q = {0.25 * s, (r[2][1] - r[1][2]) / s, (r[0][2] - r[2][0]) / s, (r[1][0] - r[0][1]) / s};
  } else if (r[0][0] >= r[1][1] && r[0][0] >= r[2][2]) {
    const double s = 2.0 * std::sqrt(1.0 + r[0][0] - r[1][1] - r[2][2]);
    q = {(r[2][1] - r[1][2]) / s, 0.25 * s, (r[0][1] + r[1][0]) / s, (r[0][2] + r[2][0]) / s};
  } else if (r[1][1] >= r[2][2]) {
    const double s = 2.0 * std::sqrt(1.0 + r[1][1] - r[0][0] - r[2][2]);
    q = {(r[0][2] - r[2][0]) / s, (r[0][1] + r[1][0]) / s, 0.25 * s, (r[1][2] + r[2][1]) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r[2][2] - r[0][0] - r[1][1]);
    q = {(r[1][0] - r[0][1]) / s, (r[0][2] + r[2][0]) / s, (r[1][2] + r[2][1]) / s, 0.25 * s};
  }
  return canonicalize(normalize(q));
}

double angular_error_deg(const Quaternion& q_true, const Quaternion& q_pred) {
  // 2*acos|<q, p>| written as 2*atan2(|vec(q^-1 p)|, |w(q^-1 p)|), which keeps
  // full precision near 0 and 180 degrees.
  const Quaternion r = multiply(conjugate(normalize(q_true)), normalize(q_pred));
  const double s = std::sqrt(r.x * r.x + r.y * r.y + r.z * r.z);
  return 2.0 * std::atan2(s, std::abs(r.w)) * 180.0 / std::numbers::pi;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  const Vec3 moved = rotate(a.rotation, b.translation);
  return {multiply(a.rotation, b.rotation),
          {moved[0] + a.translation[0], moved[1] + a.translation[1], moved[2] + a.translation[2]}};
}

RigidTransform inverse(const RigidTransform& t) {
  const Quaternion r = conjugate(t.rotation);
  const Vec3 back = rotate(r, t.translation);
  return {r, {-back[0], -back[1], -back[2]}};
}

Vec3 apply(const RigidTransform& t, const Vec3& p) {
  const Vec3 r = rotate(t.rotation, p);
  return {r[0] + t.translation[0], r[1] + t.translation[1], r[2] + t.translation[2]};
}

RigidTransform to_transform(const Pose& pose) { return {pose.orientation, pose.position}; }

Pose to_pose(const RigidTransform& t) { return {t.translation, t.rotation}; }

Pose right_camera_pose(const Pose& left, const RigidTransform& left_to_right) {
  const RigidTransform right = compose(to_transform(left), left_to_right);
  return {right.translation, canonicalize(normalize(right.rotation))};
}

}  // namespace uwpose
