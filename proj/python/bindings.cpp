// Python module _uwpose: thin wrappers over the C++ library. Configs cross the
// boundary as JSON text; poses as ((x, y, z), (w, x, y, z)) tuples.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "uwpose/dataset.hpp"
#include "uwpose/errors.hpp"
#include "uwpose/geometry.hpp"
#include "uwpose/image.hpp"
#include "uwpose/loss.hpp"
#include "uwpose/serialize.hpp"
#include "uwpose/synthgen.hpp"
#include "uwpose/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace uwpose;

namespace {

using Quat4 = std::array<double, 4>;
using PoseTuple = std::pair<Vec3, Quat4>;

Quaternion to_q(const Quat4& q) { return {q[0], q[1], q[2], q[3]}; }
Quat4 from_q(const Quaternion& q) { return {q.w, q.x, q.y, q.z}; }
Pose to_pose_(const PoseTuple& p) { return {p.first, to_q(p.second)}; }
PoseTuple from_pose(const Pose& p) { return {p.position, from_q(p.orientation)}; }

json parse_or_empty(const std::string& text) { return text.empty() ? json::object() : json::parse(text); }

fs::path generate(const std::string& preset, const fs::path& out_dir, std::optional<std::size_t> samples, bool stereo,
                  std::optional<std::uint64_t> seed, const std::string& dataset_json) {
  auto spec = synth::preset(preset);
  const auto overrides = parse_or_empty(dataset_json);
  if (!overrides.empty()) overrides.get_to(spec);
  if (samples) spec.trajectory.sample_count = *samples;
  if (stereo) spec.stereo = synth::default_stereo_extrinsic();
  if (seed) spec.scene.texture_seed = spec.scene.degradation.seed = *seed;
  return synth::generate_dataset(spec, out_dir);
}

// Trains on a manifest and writes the checkpoint; returns the history CSV.
std::string train_manifest(const fs::path& manifest, const fs::path& checkpoint, const std::string& config_json,
                           const std::optional<fs::path>& eval_manifest) {
  const auto cfg = parse_or_empty(config_json);
  ModelConfig model;
  TrainConfig tc;
  PreprocessConfig pre;
  if (cfg.contains("preprocess")) cfg.at("preprocess").get_to(pre);
  if (cfg.contains("train")) cfg.at("train").get_to(tc);
  json mj = cfg.contains("model") ? cfg.at("model") : json::object();
  mj["input_size"] = pre.crop;
  mj.get_to(model);

  const auto records = load_manifest(manifest);
  const auto norm = compute_pose_extent(records, compute_normalization(records, pre));
  PreparedSet eval;
  if (eval_manifest) eval = prepare(load_manifest(*eval_manifest), norm, pre);
  TrainResult result;
  {
    py::gil_scoped_release release;
    result = train(model, prepare(records, norm, pre), eval, norm, tc);
  }
  save_checkpoint(checkpoint, result.checkpoint);
  return history_to_csv(result.history);
}

std::string evaluate_manifest(const fs::path& checkpoint, const fs::path& manifest) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto set = prepare(load_manifest(manifest), ckpt.normalization, ckpt.preprocess);
  py::gil_scoped_release release;
  return report_to_json(evaluate(ckpt.model(), set, ckpt.normalization));
}

PoseTuple predict_image(const fs::path& checkpoint, const fs::path& image) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto input = preprocess_image(read_image(image), ckpt.normalization, ckpt.preprocess);
  PreparedSet set;
  set.preprocess = ckpt.preprocess;
  set.images.emplace_back(input.data().begin(), input.data().end());
  set.targets.emplace_back();
  set.poses.emplace_back();
  Pose p = denormalize_pose(predict(ckpt.model(), set).front(), ckpt.normalization);
  p.orientation = canonicalize(normalize(p.orientation));
  return from_pose(p);
}

double loss_value(const std::vector<Vec3>& p_hat, const std::vector<Quat4>& q_hat, const std::vector<Vec3>& p,
                  const std::vector<Quat4>& q, double beta) {
  if (p_hat.size() != q_hat.size() || p.size() != q.size() || p.size() != p_hat.size() || p.empty()) {
    throw ShapeError("composite_loss: all inputs need the same non-zero length");
  }
  const auto flat = [](const auto& rows) {
    std::vector<double> v;
    for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
    return v;
  };
  const std::size_t n = p.size();
  const PoseOutput out{ad::Tensor({n, 3}, flat(p_hat)), ad::Tensor({n, 4}, flat(q_hat))};
  const PoseTargets tgt{ad::Tensor({n, 3}, flat(p)), ad::Tensor({n, 4}, flat(q))};
  return composite_loss(out, tgt, {beta}).item();
}

}  // namespace

PYBIND11_MODULE(_uwpose, m) {
  m.doc() = "Camera pose regression for underwater inspection imagery";

  auto base = py::register_exception<Error>(m, "UwposeError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<OutOfBoundsError>(m, "OutOfBoundsError", base.ptr());
  py::register_exception<DegenerateQuaternionError>(m, "DegenerateQuaternionError", base.ptr());

  m.def("normalize_quaternion", [](const Quat4& q) { return from_q(normalize(to_q(q))); }, py::arg("q"));
  m.def("canonicalize", [](const Quat4& q) { return from_q(canonicalize(to_q(q))); }, py::arg("q"));
  m.def("angular_error_deg", [](const Quat4& a, const Quat4& b) { return angular_error_deg(to_q(a), to_q(b)); },
        py::arg("q_true"), py::arg("q_pred"));
  m.def("right_camera_pose",
        [](const PoseTuple& left, const Quat4& rotation, const Vec3& translation) {
          return from_pose(right_camera_pose(to_pose_(left), {to_q(rotation), translation}));
        },
        py::arg("left"), py::arg("rotation"), py::arg("translation"));
  m.def("composite_loss", &loss_value, py::arg("p_hat"), py::arg("q_hat"), py::arg("p"), py::arg("q"),
        py::arg("beta") = 30.0);

  m.def("load_manifest", [](const fs::path& path) {
    std::vector<std::tuple<std::string, PoseTuple, std::string>> rows;
    for (const auto& r : load_manifest(path)) rows.emplace_back(r.image_path.string(), from_pose(r.pose), to_string(r.camera));
    return rows;
  }, py::arg("path"));
  m.def("generate_dataset", &generate, py::arg("preset"), py::arg("out_dir"), py::arg("samples") = py::none(),
        py::arg("stereo") = false, py::arg("seed") = py::none(), py::arg("dataset_json") = "");
  m.def("train", &train_manifest, py::arg("manifest"), py::arg("checkpoint"), py::arg("config_json") = "",
        py::arg("eval_manifest") = py::none());
  m.def("evaluate", &evaluate_manifest, py::arg("checkpoint"), py::arg("manifest"));
  m.def("predict", &predict_image, py::arg("checkpoint"), py::arg("image"));
}
