#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "geometry_oracle.hpp"
#include "uwpose/errors.hpp"
#include "uwpose/geometry.hpp"
#include "uwpose/rng.hpp"

using namespace uwpose;
using Catch::Matchers::WithinAbs;

TEST_CASE("normalize produces unit quaternions") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Quaternion q{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    CHECK_THAT(norm(normalize(q)), WithinAbs(1.0, 1e-12));
  }
  CHECK_THROWS_AS(normalize({0, 0, 0, 0}), DegenerateQuaternionError);
  CHECK_THROWS_AS(normalize({1e-13, 0, 0, 0}), DegenerateQuaternionError);
}

TEST_CASE("canonicalize picks the w >= 0 hemisphere deterministically") {
  CHECK(canonicalize({-0.5, 0.5, -0.5, 0.5}) == Quaternion{0.5, -0.5, 0.5, -0.5});
  CHECK(canonicalize({0.0, -1.0, 0.0, 0.0}) == Quaternion{-0.0, 1.0, -0.0, -0.0});
  CHECK(canonicalize({0.0, 0.0, -0.6, 0.8}) == Quaternion{-0.0, -0.0, 0.6, -0.8});
  CHECK(canonicalize({0.0, 0.0, 0.0, -1.0}).z == 1.0);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto q = canonicalize(oracle::random_unit_quaternion(rng));
    CHECK(q.w >= 0.0);
    CHECK(canonicalize(q) == q);
  }
}

TEST_CASE("angular error examples") {
  const Quaternion id;
  const double h = std::sqrt(0.5);
  const Quaternion z90{h, 0, 0, h};
  CHECK_THAT(angular_error_deg(id, z90), WithinAbs(90.0, 1e-9));
  CHECK_THAT(oracle::matrix_angle_deg(oracle::rotation(id), oracle::rotation(z90)), WithinAbs(90.0, 1e-9));
  CHECK(angular_error_deg(z90, z90) == 0.0);
  CHECK(angular_error_deg(z90, {-h, 0, 0, -h}) == 0.0);
  // Unnormalized predictions are scored by their direction.
  CHECK_THAT(angular_error_deg(id, {3 * h, 0, 0, 3 * h}), WithinAbs(90.0, 1e-9));
  CHECK_THAT(angular_error_deg(id, {0, 1, 0, 0}), WithinAbs(180.0, 1e-9));
}

TEST_CASE("angular error agrees with the rotation-matrix angle") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::random_unit_quaternion(rng);
    const auto b = oracle::random_unit_quaternion(rng);
    CHECK_THAT(angular_error_deg(a, b),
               WithinAbs(oracle::matrix_angle_deg(oracle::rotation(a), oracle::rotation(b)), 1e-6));
  }
}

TEST_CASE("angular error is a metric on rotations") {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::random_unit_quaternion(rng);
    const auto b = oracle::random_unit_quaternion(rng);
    const auto c = oracle::random_unit_quaternion(rng);
    const Quaternion na{-a.w, -a.x, -a.y, -a.z}, nb{-b.w, -b.x, -b.y, -b.z};
    const double ab = angular_error_deg(a, b);
    CHECK_THAT(angular_error_deg(b, a), WithinAbs(ab, 1e-12));
    CHECK(ab == angular_error_deg(na, b));
    CHECK(ab == angular_error_deg(a, nb));
    CHECK(angular_error_deg(a, a) <= 1e-9);
    CHECK(angular_error_deg(a, na) <= 1e-9);
    CHECK(ab > 1e-9);
    CHECK(angular_error_deg(a, c) <= ab + angular_error_deg(b, c) + 1e-9);
  }
}

TEST_CASE("rotation matrix round trip") {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto q = canonicalize(oracle::random_unit_quaternion(rng));
    const auto back = from_rotation_matrix(to_rotation_matrix(q));
    CHECK(angular_error_deg(q, back) <= 1e-9);
    CHECK(back.w >= 0.0);
    const auto m = to_rotation_matrix(q);
    const auto r = oracle::rotation(q);
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 3; ++col) CHECK_THAT(m[row][col], WithinAbs(r[row][col], 1e-12));
  }
}

TEST_CASE("rotate agrees with the matrix form and with Hamilton products") {
  Rng rng(6);
  for (int i = 0; i < 500; ++i) {
    const auto a = oracle::random_unit_quaternion(rng);
    const auto b = oracle::random_unit_quaternion(rng);
    const Vec3 v{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const auto r = oracle::rotation(a);
    const auto rv = rotate(a, v);
    for (int k = 0; k < 3; ++k) CHECK_THAT(rv[k], WithinAbs(r[k][0] * v[0] + r[k][1] * v[1] + r[k][2] * v[2], 1e-12));
    const auto lhs = rotate(multiply(a, b), v);
    const auto rhs = rotate(a, rotate(b, v));
    for (int k = 0; k < 3; ++k) CHECK_THAT(lhs[k], WithinAbs(rhs[k], 1e-12));
  }
  const auto q = from_axis_angle({0, 0, 2}, std::numbers::pi / 2);
  const auto x = rotate(q, {1, 0, 0});
  CHECK_THAT(x[0], WithinAbs(0.0, 1e-15));
  CHECK_THAT(x[1], WithinAbs(1.0, 1e-15));
}

TEST_CASE("compose matches 4x4 homogeneous products") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::random_transform(rng);
    const auto b = oracle::random_transform(rng);
    const auto expect = oracle::mat_mul(oracle::homogeneous(a), oracle::homogeneous(b));
    CHECK(oracle::max_abs_diff(oracle::homogeneous(compose(a, b)), expect) <= 1e-12);
  }
}

TEST_CASE("inverse undoes compose") {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto t = oracle::random_transform(rng);
    const auto id = compose(t, inverse(t));
    CHECK(oracle::max_abs_diff(oracle::homogeneous(id), oracle::homogeneous(RigidTransform::identity())) <= 1e-12);
    const Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto back = uwpose::apply(inverse(t), uwpose::apply(t, p));
    for (int k = 0; k < 3; ++k) CHECK_THAT(back[k], WithinAbs(p[k], 1e-12));
  }
}

TEST_CASE("right camera pose matches homogeneous products and inverts") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const auto left_t = oracle::random_transform(rng);
    const Pose left{left_t.translation, canonicalize(left_t.rotation)};
    const auto extrinsic = oracle::random_transform(rng, 0.2);
    const Pose right = right_camera_pose(left, extrinsic);
    CHECK(right.orientation.w >= 0.0);
    CHECK_THAT(norm(right.orientation), WithinAbs(1.0, 1e-12));
    const auto expect = oracle::mat_mul(oracle::homogeneous(to_transform(left)), oracle::homogeneous(extrinsic));
    CHECK(oracle::max_abs_diff(oracle::homogeneous(to_transform(right)), expect) <= 1e-12);

    const auto back = to_pose(compose(to_transform(right), inverse(extrinsic)));
    for (int k = 0; k < 3; ++k) CHECK_THAT(back.position[k], WithinAbs(left.position[k], 1e-12));
    CHECK(oracle::max_abs_diff(oracle::homogeneous(to_transform(back)), oracle::homogeneous(to_transform(left))) <= 1e-12);
  }
}

TEST_CASE("baseline along camera x") {
  const Pose left{};
  const auto right = right_camera_pose(left, {Quaternion{}, {0.1, 0.0, 0.0}});
  CHECK(right.position == Vec3{0.1, 0.0, 0.0});
  // Camera yawed 90 degrees about world z: its x axis points along world +y.
  const Pose turned{{1.0, 2.0, 0.5}, from_axis_angle({0, 0, 1}, std::numbers::pi / 2)};
  const auto r2 = right_camera_pose(turned, {Quaternion{}, {0.1, 0.0, 0.0}});
  CHECK_THAT(r2.position[0], WithinAbs(1.0, 1e-15));
  CHECK_THAT(r2.position[1], WithinAbs(2.1, 1e-15));
  CHECK_THAT(r2.position[2], WithinAbs(0.5, 1e-15));
}
