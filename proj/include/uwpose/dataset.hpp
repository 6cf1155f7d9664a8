#pragma once

// Image/pose manifests, preprocessing and stereo augmentation.
//
// Manifest CSV (one header line, then one row per sample):
//
//   image_path,x,y,z,qw,qx,qy,qz,camera_id
//   images/000000_l.png,1.0,0.3,0.8,0.70710678,0,0,0.70710678,left
//
// Relative image paths are resolved against the manifest's directory.
// Positions are meters; the quaternion is camera-to-world in (w,x,y,z) order.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uwpose/geometry.hpp"
#include "uwpose/image.hpp"
#include "uwpose/tensor.hpp"

namespace uwpose {

enum class CameraId { kLeft, kRight };

const char* to_string(CameraId id);
CameraId camera_from_string(const std::string& s);

struct SampleRecord {
  std::filesystem::path image_path;
  Pose pose;
  CameraId camera = CameraId::kLeft;
};

// Quaternions are normalized and canonicalized on load. Errors carry the
// offending line number.
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path);
// Image paths under the manifest's directory are written relative to it.
void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

// Resize-then-center-crop geometry. The defaults are the 256 -> 224 pipeline;
// smaller pairs keep the same procedure for low-resolution experiments.
struct PreprocessConfig {
  std::size_t resize = 256;
  std::size_t crop = 224;

  std::size_t crop_offset() const { return (resize - crop) / 2; }
};

struct NormalizationState {
  std::array<double, 3> channel_mean{0.0, 0.0, 0.0};
  std::array<double, 3> channel_std{1.0, 1.0, 1.0};
  Vec3 pos_min{-1.0, -1.0, -1.0};
  Vec3 pos_max{1.0, 1.0, 1.0};

  // Axis with pos_max == pos_min; it normalizes to 0 and denormalizes to the
  // constant.
  bool degenerate(std::size_t axis) const { return pos_max[axis] == pos_min[axis]; }
  void validate() const;
};

// Bilinear resampling with half-pixel centers and edge clamping. Returns
// planar [3][out_h][out_w] values scaled to [0, 1].
std::vector<double> resize_bilinear(const RgbImage& image, std::size_t out_w, std::size_t out_h);

// Resize + center crop, no channel normalization: planar [3][crop][crop].
std::vector<double> resize_and_crop(const RgbImage& image, const PreprocessConfig& cfg);

// Full pipeline: resize, center crop, (v - mean) / std per channel.
ad::Tensor preprocess_image(const RgbImage& image, const NormalizationState& state,
                            const PreprocessConfig& cfg = {});

// Channel statistics over the cropped training images plus the position
// extent of the training poses. Loads every image once.
NormalizationState compute_normalization(const std::vector<SampleRecord>& train,
                                         const PreprocessConfig& cfg = {});
NormalizationState compute_pose_extent(const std::vector<SampleRecord>& train, NormalizationState base = {});

// Position mapped to [-1, 1] per axis, quaternion passed through.
struct NormalizedPose {
  std::array<double, 7> values{};
  bool clamped = false;
};

NormalizedPose normalize_pose(const Pose& pose, const NormalizationState& state);
// Inverse of normalize_pose for in-range positions; orientation passes
// through unchanged (not renormalized).
Pose denormalize_pose(const std::array<double, 7>& values, const NormalizationState& state);

// Maps a left record to the path of its right-camera image, or nothing.
using RightImageResolver = std::function<std::optional<std::filesystem::path>(const SampleRecord&)>;

// Replaces the last "_l." in the file name with "_r." and requires the result
// to exist.
std::optional<std::filesystem::path> sibling_right_image(const SampleRecord& left);

struct AugmentResult {
  std::vector<SampleRecord> records;
  std::vector<std::string> failures;
};

// Keeps every input record verbatim, then appends one right-camera record for
// each left record whose right image resolves. Records that fail are listed
// in `failures` and get no partner.
AugmentResult augment_stereo(const std::vector<SampleRecord>& records, const RigidTransform& left_to_right,
                             const RightImageResolver& resolver = sibling_right_image);

// Records preprocessed into network inputs and normalized targets.
struct PreparedSet {
  PreprocessConfig preprocess;
  std::vector<std::vector<double>> images;      // planar [3][crop][crop]
  std::vector<std::array<double, 7>> targets;   // normalize_pose values
  std::vector<Pose> poses;                      // world-frame labels
  std::size_t clamped = 0;                      // targets clamped into [-1, 1]

  std::size_t size() const { return images.size(); }
};

PreparedSet prepare(const std::vector<SampleRecord>& records, const NormalizationState& state,
                    const PreprocessConfig& cfg = {});

// Stacks the selected samples into [N,3,crop,crop].
ad::Tensor batch_images(const PreparedSet& set, const std::vector<std::size_t>& indices);

// Deterministic shuffle then cut; train gets round(fraction * N) records.
std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split(const std::vector<SampleRecord>& records,
                                                                      double train_fraction, std::uint64_t seed);

}  // namespace uwpose
