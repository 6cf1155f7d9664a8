#include "uwpose/serialize.hpp"

#include "uwpose/errors.hpp"

namespace uwpose {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(field);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void read_vec3(const json& j, const char* key, Vec3& v) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw ConfigError(std::string("config key '") + key + "' must be a 3-element array");
  for (std::size_t i = 0; i < 3; ++i) v[i] = a.at(i).get<double>();
}

}  // namespace

void to_json(json& j, const Quaternion& q) { j = json::array({q.w, q.x, q.y, q.z}); }

void from_json(const json& j, Quaternion& q) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("quaternion must be [w, x, y, z]");
  q = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

void to_json(json& j, const RigidTransform& t) { j = json{{"rotation", t.rotation}, {"translation", t.translation}}; }

void from_json(const json& j, RigidTransform& t) {
  read_opt(j, "rotation", t.rotation);
  read_vec3(j, "translation", t.translation);
  if (j.contains("baseline")) t.translation = {j.at("baseline").get<double>(), 0.0, 0.0};
  t.rotation = normalize(t.rotation);
}

void to_json(json& j, const Pose& p) { j = json{{"position", p.position}, {"orientation", p.orientation}}; }

void from_json(const json& j, Pose& p) {
  read_vec3(j, "position", p.position);
  read_opt(j, "orientation", p.orientation);
}

void to_json(json& j, const ModelConfig& c) {
  const auto g = c.feature_grid();
  j = json{{"backbone", to_string(c.backbone)},
           {"conv_channels", c.conv_channels},
           {"use_lstm_reducer", c.use_lstm_reducer},
           {"lstm_hidden", c.lstm_hidden},
           {"regressor_hidden", c.regressor_hidden},
           {"input_size", c.input_size},
           {"seed", c.seed},
           {"feature_grid", {g.channels, g.height, g.width}}};
}

void from_json(const json& j, ModelConfig& c) {
  if (j.contains("backbone")) c.backbone = backbone_from_string(j.at("backbone").get<std::string>());
  read_opt(j, "conv_channels", c.conv_channels);
  read_opt(j, "use_lstm_reducer", c.use_lstm_reducer);
  read_opt(j, "lstm_hidden", c.lstm_hidden);
  read_opt(j, "regressor_hidden", c.regressor_hidden);
  read_opt(j, "input_size", c.input_size);
  read_opt(j, "seed", c.seed);
  c.validate();
  if (j.contains("feature_grid")) {
    const auto g = c.feature_grid();
    const auto stored = j.at("feature_grid").get<std::vector<std::size_t>>();
    if (stored != std::vector<std::size_t>{g.channels, g.height, g.width}) {
      throw ConfigError("feature_grid in config does not match the conv stack");
    }
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"optimizer", to_string(c.optimizer)},
           {"beta", c.beta},
           {"seed", c.seed},
           {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const json& j, TrainConfig& c) {
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "learning_rate", c.learning_rate);
  if (j.contains("optimizer")) c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  read_opt(j, "beta", c.beta);
  read_opt(j, "seed", c.seed);
  read_opt(j, "checkpoint_every", c.checkpoint_every);
}

void to_json(json& j, const PreprocessConfig& c) { j = json{{"resize", c.resize}, {"crop", c.crop}}; }

void from_json(const json& j, PreprocessConfig& c) {
  read_opt(j, "resize", c.resize);
  read_opt(j, "crop", c.crop);
  if (c.crop == 0 || c.crop > c.resize) throw ConfigError("preprocess crop must be in [1, resize]");
}

void to_json(json& j, const NormalizationState& s) {
  j = json{{"channel_mean", s.channel_mean}, {"channel_std", s.channel_std}, {"pos_min", s.pos_min}, {"pos_max", s.pos_max}};
}

void from_json(const json& j, NormalizationState& s) {
  read_opt(j, "channel_mean", s.channel_mean);
  read_opt(j, "channel_std", s.channel_std);
  read_vec3(j, "pos_min", s.pos_min);
  read_vec3(j, "pos_max", s.pos_max);
  s.validate();
}

namespace synth {

void to_json(json& j, const SceneConfig& c) {
  j = json{{"extent", c.extent},
           {"texture_seed", c.texture_seed},
           {"texture_contrast", c.texture_contrast},
           {"attenuation", c.attenuation},
           {"pipe",
            {{"enabled", c.pipe.enabled},
             {"x", c.pipe.x},
             {"y", c.pipe.y},
             {"radius", c.pipe.radius},
             {"height", c.pipe.height}}},
           {"degradation",
            {{"blur_sigma", c.degradation.blur_sigma},
             {"noise_std", c.degradation.noise_std},
             {"green_tint", c.degradation.green_tint},
             {"seed", c.degradation.seed}}}};
}

void from_json(const json& j, SceneConfig& c) {
  read_vec3(j, "extent", c.extent);
  read_opt(j, "texture_seed", c.texture_seed);
  read_opt(j, "texture_contrast", c.texture_contrast);
  read_opt(j, "attenuation", c.attenuation);
  if (j.contains("pipe")) {
    const auto& p = j.at("pipe");
    read_opt(p, "enabled", c.pipe.enabled);
    read_opt(p, "x", c.pipe.x);
    read_opt(p, "y", c.pipe.y);
    read_opt(p, "radius", c.pipe.radius);
    read_opt(p, "height", c.pipe.height);
  }
  if (j.contains("degradation")) {
    const auto& d = j.at("degradation");
    read_opt(d, "blur_sigma", c.degradation.blur_sigma);
    read_opt(d, "noise_std", c.degradation.noise_std);
    read_opt(d, "green_tint", c.degradation.green_tint);
    read_opt(d, "seed", c.degradation.seed);
  }
  c.validate();
}

void to_json(json& j, const TrajectorySpec& c) {
  j = json{{"kind", to_string(c.kind)},
           {"sample_count", c.sample_count},
           {"spiral",
            {{"radius", c.spiral.radius}, {"pitch", c.spiral.pitch}, {"turns", c.spiral.turns}, {"start_z", c.spiral.start_z}}},
           {"lawnmower",
            {{"origin", c.lawnmower.origin},
             {"row_length", c.lawnmower.row_length},
             {"row_spacing", c.lawnmower.row_spacing},
             {"rows", c.lawnmower.rows},
             {"heading_deg", c.lawnmower.heading_deg}}},
           {"rotation",
            {{"anchors", c.rotation.anchors},
             {"yaw_min_deg", c.rotation.yaw_min_deg},
             {"yaw_max_deg", c.rotation.yaw_max_deg}}}};
}

void from_json(const json& j, TrajectorySpec& c) {
  if (j.contains("kind")) c.kind = trajectory_from_string(j.at("kind").get<std::string>());
  read_opt(j, "sample_count", c.sample_count);
  if (j.contains("spiral")) {
    const auto& s = j.at("spiral");
    read_opt(s, "radius", c.spiral.radius);
    read_opt(s, "pitch", c.spiral.pitch);
    read_opt(s, "turns", c.spiral.turns);
    read_opt(s, "start_z", c.spiral.start_z);
  }
  if (j.contains("lawnmower")) {
    const auto& l = j.at("lawnmower");
    read_vec3(l, "origin", c.lawnmower.origin);
    read_opt(l, "row_length", c.lawnmower.row_length);
    read_opt(l, "row_spacing", c.lawnmower.row_spacing);
    read_opt(l, "rows", c.lawnmower.rows);
    read_opt(l, "heading_deg", c.lawnmower.heading_deg);
  }
  if (j.contains("rotation")) {
    const auto& r = j.at("rotation");
    read_opt(r, "anchors", c.rotation.anchors);
    read_opt(r, "yaw_min_deg", c.rotation.yaw_min_deg);
    read_opt(r, "yaw_max_deg", c.rotation.yaw_max_deg);
  }
}

void to_json(json& j, const CameraIntrinsics& c) {
  j = json{{"width", c.width}, {"height", c.height}, {"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}};
}

void from_json(const json& j, CameraIntrinsics& c) {
  read_opt(j, "width", c.width);
  read_opt(j, "height", c.height);
  if (j.contains("hfov_deg")) {
    c = CameraIntrinsics::from_fov(c.width, c.height, j.at("hfov_deg").get<double>());
  }
  read_opt(j, "fx", c.fx);
  read_opt(j, "fy", c.fy);
  read_opt(j, "cx", c.cx);
  read_opt(j, "cy", c.cy);
  c.validate();
}

void to_json(json& j, const DatasetSpec& c) {
  j = json{{"scene", c.scene}, {"trajectory", c.trajectory}, {"camera", c.camera}};
  if (c.stereo) j["stereo"] = *c.stereo;
  else j["stereo"] = nullptr;
}

void from_json(const json& j, DatasetSpec& c) {
  read_opt(j, "scene", c.scene);
  read_opt(j, "trajectory", c.trajectory);
  read_opt(j, "camera", c.camera);
  if (j.contains("stereo")) {
    if (j.at("stereo").is_null() || j.at("stereo") == false) {
      c.stereo.reset();
    } else if (j.at("stereo") == true) {
      c.stereo = default_stereo_extrinsic();
    } else {
      c.stereo = j.at("stereo").get<RigidTransform>();
    }
  }
}

}  // namespace synth

}  // namespace uwpose
