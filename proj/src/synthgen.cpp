#include "uwpose/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

#include "uwpose/dataset.hpp"
#include "uwpose/errors.hpp"
#include "uwpose/rng.hpp"

namespace uwpose::synth {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt_vec(const Vec3& v) {
  return "(" + std::to_string(v[0]) + ", " + std::to_string(v[1]) + ", " + std::to_string(v[2]) + ")";
}

// Lattice value in [0, 1) for value noise.
double lattice(std::uint64_t seed, int wall, int octave, std::int64_t i, std::int64_t j) {
  std::uint64_t h = mix_seed(seed, static_cast<std::uint64_t>(wall * 16 + octave));
  h = mix_seed(h, static_cast<std::uint64_t>(i) * 0x9E3779B1ULL);
  h = mix_seed(h, static_cast<std::uint64_t>(j) * 0x85EBCA77ULL);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, int wall, double u, double v) {
  static constexpr double kFreq[] = {1.5, 3.0, 6.0, 12.0};
  static constexpr double kAmp[] = {0.45, 0.25, 0.18, 0.12};
  double total = 0.0;
  for (int o = 0; o < 4; ++o) {
    const double x = u * kFreq[o], y = v * kFreq[o];
    const double fx = std::floor(x), fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    const double tx = smooth(x - fx), ty = smooth(y - fy);
    const double a = lattice(seed, wall, o, ix, iy), b = lattice(seed, wall, o, ix + 1, iy);
    const double c = lattice(seed, wall, o, ix, iy + 1), d = lattice(seed, wall, o, ix + 1, iy + 1);
    total += kAmp[o] * ((1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d));
  }
  return total;  // amplitudes sum to 1
}

Rgb scale(const Rgb& c, double s) { return {c.r * s, c.g * s, c.b * s}; }

Rgb wall_color(const SceneConfig& scene, int wall, const Vec3& hit) {
  const int axis = wall / 2;
  const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
  const double u = hit[ua] / scene.extent[ua], v = hit[va] / scene.extent[va];
  const double k = scene.texture_contrast;
  const double noise = value_noise(scene.texture_seed, wall, hit[ua], hit[va]);
  const double shade = 1.0 + k * 0.6 * (2.0 * noise - 1.0);
  Rgb base = wall_base_color(wall);
  // Slow ramps along both wall axes make absolute position legible.
  base.r *= 1.0 + k * 0.35 * (u - 0.5);
  base.b *= 1.0 + k * 0.35 * (v - 0.5);
  return scale(base, shade);
}

Rgb pipe_color(const SceneConfig& scene, const Vec3& hit) {
  const double k = scene.texture_contrast;
  if (k == 0.0) return pipe_base_color();
  const double angle = std::atan2(hit[1] - scene.pipe.y, hit[0] - scene.pipe.x);
  const int sector = static_cast<int>(std::floor((angle + kPi) / (2.0 * kPi) * 8.0)) % 8;
  Rgb c = pipe_base_color();
  if (sector == 0) c = {0.15, 0.35, 0.85};  // marker stripe breaks the rotational symmetry
  double s = (sector % 2 == 0) ? 1.0 : 1.0 - 0.35 * k;
  const double band = hit[2] / 0.25 - std::floor(hit[2] / 0.25);
  if (band < 0.12) s *= 1.0 - 0.5 * k;
  return scale(c, s);
}

void check_inside(const Vec3& p, const SceneConfig& scene, const std::string& what) {
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] > 0.0 && p[a] < scene.extent[a])) {
      throw OutOfBoundsError(what + " at " + fmt_vec(p) + " is outside the tank " + fmt_vec(scene.extent));
    }
  }
  if (scene.pipe.enabled && p[2] <= scene.pipe.height) {
    const double dx = p[0] - scene.pipe.x, dy = p[1] - scene.pipe.y;
    if (dx * dx + dy * dy <= scene.pipe.radius * scene.pipe.radius) {
      throw OutOfBoundsError(what + " at " + fmt_vec(p) + " is inside the pipe");
    }
  }
}

std::uint64_t pose_hash(const Pose& pose) {
  const double v[7] = {pose.position[0], pose.position[1], pose.position[2], pose.orientation.w,
                       pose.orientation.x, pose.orientation.y, pose.orientation.z};
  std::uint64_t h = 0;
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    h = mix_seed(h, bits);
  }
  return h;
}

void gaussian_blur(std::vector<double>& img, std::size_t w, std::size_t h, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) total += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& k : kernel) k /= total;
  std::vector<double> tmp(img.size());
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = clampi(static_cast<int>(x) + i, static_cast<int>(w) - 1);
          s += kernel[i + radius] * img[(y * w + xx) * 3 + c];
        }
        tmp[(y * w + x) * 3 + c] = s;
      }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = clampi(static_cast<int>(y) + i, static_cast<int>(h) - 1);
          s += kernel[i + radius] * tmp[(yy * w + x) * 3 + c];
        }
        img[(y * w + x) * 3 + c] = s;
      }
}

}  // namespace

Rgb wall_base_color(int wall) {
  static constexpr Rgb kColors[6] = {{0.75, 0.35, 0.30}, {0.30, 0.55, 0.80}, {0.35, 0.70, 0.35},
                                     {0.80, 0.75, 0.30}, {0.55, 0.50, 0.45}, {0.60, 0.80, 0.90}};
  return kColors[wall];
}

Rgb pipe_base_color() { return {0.90, 0.45, 0.10}; }

Rgb water_color() { return {0.05, 0.25, 0.30}; }

void SceneConfig::validate() const {
  for (double e : extent) {
    if (!(e > 0.0)) throw ConfigError("scene extent must be positive");
  }
  if (texture_contrast < 0.0 || attenuation < 0.0) throw ConfigError("texture_contrast and attenuation must be >= 0");
  if (pipe.enabled) {
    if (!(pipe.radius > 0.0) || !(pipe.height > 0.0)) throw ConfigError("pipe radius and height must be positive");
    if (pipe.x - pipe.radius <= 0.0 || pipe.x + pipe.radius >= extent[0] || pipe.y - pipe.radius <= 0.0 ||
        pipe.y + pipe.radius >= extent[1] || pipe.height > extent[2]) {
      throw ConfigError("pipe must lie inside the tank");
    }
  }
  if (degradation.blur_sigma < 0.0 || degradation.noise_std < 0.0 || degradation.green_tint < 0.0 ||
      degradation.green_tint > 1.0) {
    throw ConfigError("invalid degradation settings");
  }
}

SceneConfig SceneConfig::simulator_preset() { return SceneConfig{}; }

SceneConfig SceneConfig::tank_preset() {
  SceneConfig s;
  s.extent = {1.6, 1.0, 1.0};
  s.pipe.enabled = false;
  s.attenuation = 0.3;
  return s;
}

CameraIntrinsics CameraIntrinsics::from_fov(std::size_t width, std::size_t height, double horizontal_fov_deg) {
  CameraIntrinsics c;
  c.width = width;
  c.height = height;
  c.fx = c.fy = 0.5 * static_cast<double>(width) / std::tan(0.5 * horizontal_fov_deg * kPi / 180.0);
  c.cx = 0.5 * static_cast<double>(width);
  c.cy = 0.5 * static_cast<double>(height);
  return c;
}

void CameraIntrinsics::validate() const {
  if (width == 0 || height == 0 || !(fx > 0.0) || !(fy > 0.0)) throw ConfigError("invalid camera intrinsics");
}

RgbImage render(const Pose& pose, const CameraIntrinsics& cam, const SceneConfig& scene) {
  scene.validate();
  cam.validate();
  check_inside(pose.position, scene, "camera");
  const Mat3 rot = to_rotation_matrix(normalize(pose.orientation));
  const Vec3& o = pose.position;
  const Rgb water = water_color();
  const std::size_t w = cam.width, h = cam.height;
  std::vector<double> buf(w * h * 3);

  for (std::size_t py = 0; py < h; ++py) {
    for (std::size_t px = 0; px < w; ++px) {
      const Vec3 dc{(static_cast<double>(px) + 0.5 - cam.cx) / cam.fx, (static_cast<double>(py) + 0.5 - cam.cy) / cam.fy, 1.0};
      Vec3 d{};
      for (int i = 0; i < 3; ++i) d[i] = rot[i][0] * dc[0] + rot[i][1] * dc[1] + rot[i][2] * dc[2];

      double t_hit = std::numeric_limits<double>::infinity();
      int wall = 0;
      for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) continue;
        const double t = d[a] > 0.0 ? (scene.extent[a] - o[a]) / d[a] : -o[a] / d[a];
        if (t < t_hit) {
          t_hit = t;
          wall = 2 * a + (d[a] > 0.0 ? 1 : 0);
        }
      }
      auto at = [&](double t) { return Vec3{o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]}; };
      Vec3 hit = at(t_hit);
      Rgb color = wall_color(scene, wall, hit);

      if (scene.pipe.enabled) {
        const double ox = o[0] - scene.pipe.x, oy = o[1] - scene.pipe.y, r = scene.pipe.radius;
        const double qa = d[0] * d[0] + d[1] * d[1];
        const double qb = 2.0 * (ox * d[0] + oy * d[1]);
        const double qc = ox * ox + oy * oy - r * r;
        const double disc = qb * qb - 4.0 * qa * qc;
        bool pipe_hit = false;
        if (qa > 0.0 && disc >= 0.0) {
          const double t = (-qb - std::sqrt(disc)) / (2.0 * qa);
          if (t > 0.0 && t < t_hit) {
            const Vec3 p = at(t);
            if (p[2] >= 0.0 && p[2] <= scene.pipe.height) {
              t_hit = t;
              hit = p;
              color = pipe_color(scene, hit);
              pipe_hit = true;
            }
          }
        }
        if (!pipe_hit && d[2] != 0.0) {
          // Top cap, visible from above a short pipe.
          const double t = (scene.pipe.height - o[2]) / d[2];
          if (t > 0.0 && t < t_hit) {
            const Vec3 p = at(t);
            const double dx = p[0] - scene.pipe.x, dy = p[1] - scene.pipe.y;
            if (dx * dx + dy * dy <= r * r) {
              t_hit = t;
              color = scale(pipe_base_color(), 0.8);
            }
          }
        }
      }

      const double dist = t_hit * std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
      const double keep = std::exp(-scene.attenuation * dist);
      double* out = &buf[(py * w + px) * 3];
      out[0] = water.r + (color.r - water.r) * keep;
      out[1] = water.g + (color.g - water.g) * keep;
      out[2] = water.b + (color.b - water.b) * keep;
    }
  }

  const auto& deg = scene.degradation;
  if (deg.green_tint > 0.0) {
    static constexpr double kTurbid[3] = {0.10, 0.55, 0.35};
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += deg.green_tint * (kTurbid[i % 3] - buf[i]);
  }
  if (deg.blur_sigma > 0.0) gaussian_blur(buf, w, h, deg.blur_sigma);
  if (deg.noise_std > 0.0) {
    Rng rng(mix_seed(deg.seed, pose_hash(pose)));
    for (auto& v : buf) v += deg.noise_std * rng.normal();
  }

  RgbImage img(w, h);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(buf[i], 0.0, 1.0) * 255.0));
  }
  return img;
}

Quaternion level_orientation(double yaw_rad) {
  const double c = std::cos(yaw_rad), s = std::sin(yaw_rad);
  // Columns: camera x (right), y (down), z (forward) in world coordinates.
  const Mat3 r{{{s, 0.0, c}, {-c, 0.0, s}, {0.0, -1.0, 0.0}}};
  return from_rotation_matrix(r);
}

const char* to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kSpiral: return "spiral";
    case TrajectoryKind::kLawnmower: return "lawnmower";
    case TrajectoryKind::kRotationAtPoints: return "rotation_at_points";
  }
  return "?";
}

TrajectoryKind trajectory_from_string(const std::string& s) {
  if (s == "spiral") return TrajectoryKind::kSpiral;
  if (s == "lawnmower") return TrajectoryKind::kLawnmower;
  if (s == "rotation_at_points" || s == "rotation") return TrajectoryKind::kRotationAtPoints;
  throw ConfigError("unknown trajectory kind '" + s + "'");
}

std::vector<Pose> generate_trajectory(const TrajectorySpec& spec, const SceneConfig& scene) {
  scene.validate();
  const std::size_t n = spec.sample_count;
  if (n == 0) throw ConfigError("sample_count must be positive");
  std::vector<Pose> poses;
  poses.reserve(n);

  switch (spec.kind) {
    case TrajectoryKind::kSpiral: {
      const auto& s = spec.spiral;
      if (!scene.pipe.enabled) throw ConfigError("spiral trajectories circle the pipe; enable it");
      if (!(s.radius > 0.0) || !(s.turns > 0.0)) throw ConfigError("spiral radius and turns must be positive");
      for (std::size_t i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n);
        const double theta = 2.0 * kPi * s.turns * frac;
        Pose p;
        p.position = {scene.pipe.x + s.radius * std::cos(theta), scene.pipe.y + s.radius * std::sin(theta),
                      s.start_z + s.pitch * s.turns * frac};
        p.orientation = level_orientation(theta + kPi);
        poses.push_back(p);
      }
      break;
    }
    case TrajectoryKind::kLawnmower: {
      const auto& l = spec.lawnmower;
      if (l.rows == 0) throw ConfigError("lawnmower needs at least one row");
      const Quaternion q = level_orientation(l.heading_deg * kPi / 180.0);
      for (std::size_t row = 0; row < l.rows; ++row) {
        const std::size_t begin = row * n / l.rows, end = (row + 1) * n / l.rows;
        const std::size_t count = end - begin;
        for (std::size_t j = 0; j < count; ++j) {
          // Fraction first, so both row ends land exactly on 0 and row_length.
          double t = count > 1 ? static_cast<double>(j) / static_cast<double>(count - 1) : 0.0;
          if (row % 2 == 1) t = 1.0 - t;  // boustrophedon
          const double along = l.row_length * t;
          Pose p;
          p.position = {l.origin[0] + along, l.origin[1] + l.row_spacing * static_cast<double>(row), l.origin[2]};
          p.orientation = q;
          poses.push_back(p);
        }
      }
      break;
    }
    case TrajectoryKind::kRotationAtPoints: {
      const auto& r = spec.rotation;
      if (r.anchors.empty()) throw ConfigError("rotation trajectory needs anchor points");
      if (n % r.anchors.size() != 0) {
        throw ConfigError("sample_count " + std::to_string(n) + " is not a multiple of the " +
                          std::to_string(r.anchors.size()) + " anchors");
      }
      const std::size_t per = n / r.anchors.size();
      for (const auto& anchor : r.anchors) {
        for (std::size_t k = 0; k < per; ++k) {
          const double t = per > 1 ? static_cast<double>(k) / static_cast<double>(per - 1) : 0.5;
          const double yaw = (r.yaw_min_deg + t * (r.yaw_max_deg - r.yaw_min_deg)) * kPi / 180.0;
          poses.push_back({anchor, level_orientation(yaw)});
        }
      }
      break;
    }
  }
  for (std::size_t i = 0; i < poses.size(); ++i) check_inside(poses[i].position, scene, "sample " + std::to_string(i));
  return poses;
}

RigidTransform default_stereo_extrinsic(double baseline_m) { return {Quaternion::identity(), {baseline_m, 0.0, 0.0}}; }

fs::path generate_dataset(const DatasetSpec& spec, const fs::path& out_dir) {
  const auto poses = generate_trajectory(spec.trajectory, spec.scene);
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  std::vector<SampleRecord> records;
  auto image_name = [](std::size_t i, char side) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu_%c.png", i, side);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const fs::path left = out_dir / "images" / image_name(i, 'l');
    write_png(left, render(poses[i], spec.camera, spec.scene));
    records.push_back({left, poses[i], CameraId::kLeft});
    if (spec.stereo) {
      const Pose right_pose = right_camera_pose(poses[i], *spec.stereo);
      check_inside(right_pose.position, spec.scene, "right camera of sample " + std::to_string(i));
      const fs::path right = out_dir / "images" / image_name(i, 'r');
      write_png(right, render(right_pose, spec.camera, spec.scene));
      records.push_back({right, right_pose, CameraId::kRight});
    }
  }
  const fs::path manifest = out_dir / "manifest.csv";
  write_manifest(manifest, records);
  return manifest;
}

DatasetSpec preset(const std::string& name) {
  DatasetSpec spec;
  if (name == "sim-spiral") {
    spec.scene = SceneConfig::simulator_preset();
    spec.trajectory.kind = TrajectoryKind::kSpiral;
    spec.trajectory.sample_count = 700;
  } else if (name == "tank-lawnmower") {
    spec.scene = SceneConfig::tank_preset();
    spec.trajectory.kind = TrajectoryKind::kLawnmower;
    spec.trajectory.sample_count = 400;
  } else if (name == "tank-rotation") {
    spec.scene = SceneConfig::tank_preset();
    spec.trajectory.kind = TrajectoryKind::kRotationAtPoints;
    spec.trajectory.sample_count = 400;
    spec.trajectory.rotation.anchors = {
        {0.6, 0.2, 0.4}, {1.0, 0.2, 0.5}, {0.8, 0.5, 0.45}, {0.6, 0.8, 0.6}, {1.0, 0.8, 0.5}};
  } else {
    throw ConfigError("unknown preset '" + name + "' (sim-spiral, tank-lawnmower, tank-rotation)");
  }
  return spec;
}

}  // namespace uwpose::synth
