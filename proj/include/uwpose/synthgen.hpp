#pragma once

// Procedural stand-in for an underwater inspection scene: a textured
// axis-aligned tank with an optional vertical pipe, rendered by per-pixel ray
// casting, plus the three trajectory families used to build datasets
// (spiral around the pipe, translation-only lawnmower, rotations in place).
//
// World frame: tank spans [0, extent] on each axis, z up. Camera frame:
// x right, y down, z forward (pinhole).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uwpose/geometry.hpp"
#include "uwpose/image.hpp"

namespace uwpose::synth {

struct PipeSpec {
  bool enabled = true;
  double x = 1.0, y = 2.0;  // axis position
  double radius = 0.15;
  double height = 2.0;      // from the floor
};

struct Degradation {
  double blur_sigma = 0.0;   // pixels
  double noise_std = 0.0;    // in [0,1] intensity units
  double green_tint = 0.0;   // 0..1 blend toward a turbid green
  std::uint64_t seed = 1;
};

struct SceneConfig {
  Vec3 extent{2.0, 4.0, 2.0};
  std::uint64_t texture_seed = 7;
  // 0 renders every wall in its flat base color.
  double texture_contrast = 1.0;
  // Per-meter fade toward the water color.
  double attenuation = 0.15;
  PipeSpec pipe;
  Degradation degradation;

  void validate() const;

  static SceneConfig simulator_preset();  // 2 x 4 x 2 m with a center pipe
  static SceneConfig tank_preset();       // 1.6 x 1 x 1 m tank, no pipe
};

struct CameraIntrinsics {
  std::size_t width = 64, height = 64;
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;

  static CameraIntrinsics from_fov(std::size_t width, std::size_t height, double horizontal_fov_deg);
  void validate() const;
};

// Flat base colors in [0,1], exposed for tests.
struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
};
Rgb wall_base_color(int wall);  // 0:x=0 1:x=max 2:y=0 3:y=max 4:floor 5:surface
Rgb pipe_base_color();
Rgb water_color();

// Throws OutOfBoundsError if the camera is not strictly inside the tank or
// sits inside the pipe.
RgbImage render(const Pose& pose, const CameraIntrinsics& cam, const SceneConfig& scene);

// Level camera (optical axis horizontal, image rows parallel to the floor)
// looking along world heading `yaw_rad` measured from +x toward +y.
Quaternion level_orientation(double yaw_rad);

enum class TrajectoryKind { kSpiral, kLawnmower, kRotationAtPoints };

const char* to_string(TrajectoryKind k);
TrajectoryKind trajectory_from_string(const std::string& s);

struct SpiralParams {
  double radius = 0.7;    // around the pipe axis
  double pitch = 0.4;     // rise per full turn, meters
  double turns = 3.0;
  double start_z = 0.4;
};

struct LawnmowerParams {
  Vec3 origin{0.3, 0.2, 0.5};  // first sample; depth is origin z
  double row_length = 0.4;     // along +x
  double row_spacing = 0.15;   // along +y
  std::size_t rows = 5;
  double heading_deg = 0.0;
};

struct RotationParams {
  std::vector<Vec3> anchors;
  double yaw_min_deg = -60.0;
  double yaw_max_deg = 60.0;
};

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kSpiral;
  std::size_t sample_count = 100;
  SpiralParams spiral;
  LawnmowerParams lawnmower;
  RotationParams rotation;
};

// Poses carry unit, canonical quaternions. Throws OutOfBoundsError naming the
// first sample that leaves the tank, ConfigError for invalid specs.
std::vector<Pose> generate_trajectory(const TrajectorySpec& spec, const SceneConfig& scene);

struct DatasetSpec {
  SceneConfig scene;
  TrajectorySpec trajectory;
  CameraIntrinsics camera = CameraIntrinsics::from_fov(64, 64, 70.0);
  std::optional<RigidTransform> stereo;  // left->right extrinsic when rendering pairs
};

// Default stereo rig: right camera 6 cm along the left camera's x axis.
RigidTransform default_stereo_extrinsic(double baseline_m = 0.06);

// Writes out_dir/images/NNNNNN_{l|r}.png and out_dir/manifest.csv (rows in
// trajectory order, each left row followed by its right partner). Returns the
// manifest path.
std::filesystem::path generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

// Named configurations: "sim-spiral", "tank-lawnmower", "tank-rotation".
DatasetSpec preset(const std::string& name);

}  // namespace uwpose::synth
