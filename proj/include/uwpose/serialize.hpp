#pragma once

// JSON forms of the configuration types. Missing keys keep their defaults, so
// partial config files are valid.

#include <json.hpp>

#include "uwpose/dataset.hpp"
#include "uwpose/geometry.hpp"
#include "uwpose/model.hpp"
#include "uwpose/synthgen.hpp"
#include "uwpose/trainer.hpp"

namespace uwpose {

void to_json(nlohmann::json& j, const Quaternion& q);
void from_json(const nlohmann::json& j, Quaternion& q);
void to_json(nlohmann::json& j, const RigidTransform& t);
void from_json(const nlohmann::json& j, RigidTransform& t);
void to_json(nlohmann::json& j, const Pose& p);
void from_json(const nlohmann::json& j, Pose& p);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const PreprocessConfig& c);
void from_json(const nlohmann::json& j, PreprocessConfig& c);
void to_json(nlohmann::json& j, const NormalizationState& s);
void from_json(const nlohmann::json& j, NormalizationState& s);

namespace synth {
void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);
void to_json(nlohmann::json& j, const TrajectorySpec& c);
void from_json(const nlohmann::json& j, TrajectorySpec& c);
void to_json(nlohmann::json& j, const CameraIntrinsics& c);
void from_json(const nlohmann::json& j, CameraIntrinsics& c);
void to_json(nlohmann::json& j, const DatasetSpec& c);
void from_json(const nlohmann::json& j, DatasetSpec& c);
}  // namespace synth

}  // namespace uwpose
