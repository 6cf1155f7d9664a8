// uwpose: dataset generation, training, evaluation and export.
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 data error, 3 divergence.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "uwpose/dataset.hpp"
#include "uwpose/errors.hpp"
#include "uwpose/image.hpp"
#include "uwpose/loss.hpp"
#include "uwpose/serialize.hpp"
#include "uwpose/synthgen.hpp"
#include "uwpose/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace uwpose;

namespace {

constexpr const char* kVersion = "0.1.0";

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Record of one invocation, written next to its primary output.
struct RunManifest {
  std::string subcommand;
  json config = json::object();
  json inputs = json::object();
  json outputs = json::object();
  std::optional<std::uint64_t> seed;
  std::string started_at = utc_now();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const fs::path& path) const {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json j{{"subcommand", subcommand}, {"config", config},         {"inputs", inputs},
           {"outputs", outputs},       {"tool_version", kVersion}, {"started_at", started_at},
           {"duration_s", secs}};
    j["seed"] = seed ? json(*seed) : json(nullptr);
    write_text(path, j.dump(2) + "\n");
  }
};

fs::path run_manifest_path(const fs::path& output) { return fs::path(output.string() + ".run.json"); }

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// ---- gen ----

struct GenOptions {
  std::string preset;
  fs::path config;
  fs::path out;
  bool stereo = false;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
};

int run_gen(const GenOptions& o) {
  RunManifest run{"gen"};
  json cfg = o.config.empty() ? json::object() : read_json_file(o.config);

  std::string preset_name = "sim-spiral";
  if (cfg.contains("preset")) preset_name = cfg.at("preset").get<std::string>();
  if (!o.preset.empty()) preset_name = o.preset;
  auto spec = synth::preset(preset_name);
  if (cfg.contains("dataset")) cfg.at("dataset").get_to(spec);

  if (o.stereo) spec.stereo = synth::default_stereo_extrinsic();
  if (o.samples) spec.trajectory.sample_count = *o.samples;
  if (o.seed) {
    spec.scene.texture_seed = *o.seed;
    spec.scene.degradation.seed = *o.seed;
  }

  const auto manifest = synth::generate_dataset(spec, o.out);
  run.config = {{"preset", preset_name}, {"dataset", spec}};
  run.seed = spec.scene.texture_seed;
  if (!o.config.empty()) run.inputs["config"] = o.config.string();
  run.outputs["manifest"] = manifest.string();
  run.write(o.out / "run.json");
  std::cout << manifest.string() << "\n";
  return 0;
}

// ---- train ----

struct TrainOptions {
  fs::path manifest;
  fs::path eval_manifest;
  fs::path out;
  fs::path history;
  fs::path config;
  std::optional<std::string> arch;
  bool lstm = false;
  std::optional<double> beta;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::string> optimizer;
  std::optional<std::size_t> resize;
  std::optional<std::size_t> crop;
  bool quiet = false;
};

int run_train(const TrainOptions& o) {
  RunManifest run{"train"};
  const json cfg = o.config.empty() ? json::object() : read_json_file(o.config);

  ModelConfig model;
  TrainConfig train_cfg;
  PreprocessConfig pre;
  if (cfg.contains("model")) cfg.at("model").get_to(model);
  if (cfg.contains("train")) cfg.at("train").get_to(train_cfg);
  if (cfg.contains("preprocess")) cfg.at("preprocess").get_to(pre);

  if (o.arch) model.backbone = backbone_from_string(*o.arch);
  if (o.lstm) model.use_lstm_reducer = true;
  if (o.beta) train_cfg.beta = *o.beta;
  if (o.seed) model.seed = train_cfg.seed = *o.seed;
  if (o.epochs) train_cfg.epochs = *o.epochs;
  if (o.batch_size) train_cfg.batch_size = *o.batch_size;
  if (o.lr) train_cfg.learning_rate = *o.lr;
  if (o.optimizer) train_cfg.optimizer = optimizer_from_string(*o.optimizer);
  if (o.resize) pre.resize = *o.resize;
  if (o.crop) pre.crop = *o.crop;
  if (pre.crop == 0 || pre.crop > pre.resize) throw ConfigError("crop must be in [1, resize]");
  // The network consumes the crop directly.
  model.input_size = pre.crop;
  model.validate();
  train_cfg.validate();

  const auto records = load_manifest(o.manifest);
  if (records.empty()) throw ConfigError("manifest " + o.manifest.string() + " has no rows");
  const auto norm = compute_pose_extent(records, compute_normalization(records, pre));
  const auto train_set = prepare(records, norm, pre);
  PreparedSet eval_set;
  if (!o.eval_manifest.empty()) eval_set = prepare(load_manifest(o.eval_manifest), norm, pre);

  const auto result = train(model, train_set, eval_set, norm, train_cfg, [&](const EpochStats& s) {
    if (o.quiet) return;
    std::cerr << "epoch " << s.epoch << "/" << train_cfg.epochs << " loss " << s.mean_loss;
    if (!std::isnan(s.mean_pos_err_m)) std::cerr << " pos " << s.mean_pos_err_m << " m ori " << s.mean_ori_err_deg << " deg";
    std::cerr << "\n";
  });

  // Only write once training finished, so a failure leaves no checkpoint.
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  save_checkpoint(o.out, result.checkpoint);
  const fs::path history = o.history.empty() ? fs::path(o.out.string() + ".history.csv") : o.history;
  write_text(history, history_to_csv(result.history));

  run.config = {{"model", model}, {"train", train_cfg}, {"preprocess", pre}, {"normalization", norm}};
  run.seed = train_cfg.seed;
  run.inputs["manifest"] = o.manifest.string();
  if (!o.eval_manifest.empty()) run.inputs["eval_manifest"] = o.eval_manifest.string();
  if (!o.config.empty()) run.inputs["config"] = o.config.string();
  run.outputs = {{"checkpoint", o.out.string()}, {"history", history.string()}};
  run.write(run_manifest_path(o.out));
  return 0;
}

// ---- eval / export-traj / predict ----

struct ScoredSet {
  Checkpoint ckpt;
  PreparedSet set;
  PredictionRows rows;
  EvalReport report;
};

ScoredSet score(const fs::path& checkpoint, const fs::path& manifest) {
  ScoredSet s{load_checkpoint(checkpoint), {}, {}, {}};
  s.set = prepare(load_manifest(manifest), s.ckpt.normalization, s.ckpt.preprocess);
  if (s.set.size() == 0) throw ConfigError("manifest " + manifest.string() + " has no rows");
  s.rows = predict(s.ckpt.model(), s.set);
  s.report = evaluate_predictions(s.set.poses, s.rows, s.ckpt.normalization);
  return s;
}

struct EvalOptions {
  fs::path checkpoint;
  fs::path manifest;
  fs::path out;
};

int run_eval(const EvalOptions& o) {
  RunManifest run{"eval"};
  const auto s = score(o.checkpoint, o.manifest);
  const auto text = report_to_json(s.report);
  if (o.out.empty()) {
    std::cout << text << "\n";
    return 0;
  }
  write_text(o.out, text + "\n");
  run.config = {{"model", s.ckpt.model_config}, {"preprocess", s.ckpt.preprocess}};
  run.inputs = {{"checkpoint", o.checkpoint.string()}, {"manifest", o.manifest.string()}};
  run.outputs["report"] = o.out.string();
  run.write(run_manifest_path(o.out));
  return 0;
}

int run_export(const EvalOptions& o) {
  RunManifest run{"export-traj"};
  const auto s = score(o.checkpoint, o.manifest);
  std::ostringstream csv;
  csv << "idx,true_x,true_y,true_z,true_qw,true_qx,true_qy,true_qz,"
         "pred_x,pred_y,pred_z,pred_qw,pred_qx,pred_qy,pred_qz,pos_err_m,ori_err_deg\n";
  for (std::size_t i = 0; i < s.set.size(); ++i) {
    const Pose& t = s.set.poses[i];
    Pose p = denormalize_pose(s.rows[i], s.ckpt.normalization);
    p.orientation = canonicalize(normalize(p.orientation));
    csv << i;
    for (const Pose* pose : {&t, static_cast<const Pose*>(&p)}) {
      for (double v : pose->position) csv << "," << fmt(v);
      const auto& q = pose->orientation;
      for (double v : {q.w, q.x, q.y, q.z}) csv << "," << fmt(v);
    }
    csv << "," << fmt(s.report.position_errors_m[i]) << "," << fmt(s.report.orientation_errors_deg[i]) << "\n";
  }
  write_text(o.out, csv.str());
  run.config = {{"model", s.ckpt.model_config}, {"preprocess", s.ckpt.preprocess}};
  run.inputs = {{"checkpoint", o.checkpoint.string()}, {"manifest", o.manifest.string()}};
  run.outputs["csv"] = o.out.string();
  run.write(run_manifest_path(o.out));
  return 0;
}

struct PredictOptions {
  fs::path checkpoint;
  fs::path image;
};

int run_predict(const PredictOptions& o) {
  const auto ckpt = load_checkpoint(o.checkpoint);
  PreparedSet set;
  set.preprocess = ckpt.preprocess;
  const auto input = preprocess_image(read_image(o.image), ckpt.normalization, ckpt.preprocess);
  set.images.emplace_back(input.data().begin(), input.data().end());
  set.targets.emplace_back();
  set.poses.emplace_back();
  const auto row = predict(ckpt.model(), set).front();
  Pose p = denormalize_pose(row, ckpt.normalization);
  p.orientation = canonicalize(normalize(p.orientation));
  std::cout << json{{"image", o.image.string()}, {"pose", p}}.dump() << "\n";
  return 0;
}

// ---- augment ----

struct AugmentOptions {
  fs::path manifest;
  fs::path extrinsic;
  fs::path out;
  std::optional<double> baseline;
};

int run_augment(const AugmentOptions& o) {
  RunManifest run{"augment"};
  RigidTransform extrinsic = synth::default_stereo_extrinsic();
  if (!o.extrinsic.empty()) read_json_file(o.extrinsic).get_to(extrinsic);
  if (o.baseline) extrinsic = synth::default_stereo_extrinsic(*o.baseline);

  const auto result = augment_stereo(load_manifest(o.manifest), extrinsic);
  for (const auto& f : result.failures) std::cerr << "warning: " << f << "\n";
  write_manifest(o.out, result.records);
  run.config["extrinsic"] = extrinsic;
  run.inputs["manifest"] = o.manifest.string();
  if (!o.extrinsic.empty()) run.inputs["extrinsic"] = o.extrinsic.string();
  run.outputs = {{"manifest", o.out.string()}, {"rows", result.records.size()}, {"failures", result.failures}};
  run.write(run_manifest_path(o.out));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera pose regression for underwater inspection imagery"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Render a synthetic dataset");
  g->add_option("--preset", gen.preset, "sim-spiral, tank-lawnmower or tank-rotation");
  g->add_option("--config", gen.config, "JSON with optional 'preset' and 'dataset' keys")->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_flag("--stereo", gen.stereo, "Also render right-camera images");
  g->add_option("--samples", gen.samples, "Trajectory sample count");
  g->add_option("--seed", gen.seed, "Texture and noise seed");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a pose regressor");
  t->add_option("--manifest", tr.manifest, "Training manifest")->required();
  t->add_option("--eval-manifest", tr.eval_manifest, "Held-out manifest scored after every epoch");
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--history", tr.history, "Loss history CSV (default <out>.history.csv)");
  t->add_option("--config", tr.config, "JSON with 'model', 'train', 'preprocess' keys")->check(CLI::ExistingFile);
  t->add_option("--arch", tr.arch, "Backbone")->check(CLI::IsMember({"baseline", "residual"}));
  t->add_flag("--lstm", tr.lstm, "Use the four-scan LSTM reducer");
  t->add_option("--beta", tr.beta, "Orientation loss weight (default 30)");
  t->add_option("--seed", tr.seed, "Initialization and shuffle seed");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--lr", tr.lr, "Learning rate");
  t->add_option("--optimizer", tr.optimizer)->check(CLI::IsMember({"adam", "sgd"}));
  t->add_option("--resize", tr.resize, "Resize side before cropping");
  t->add_option("--crop", tr.crop, "Center crop side; also the network input size");
  t->add_flag("--quiet", tr.quiet, "No per-epoch progress");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on a manifest");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--manifest", ev.manifest)->required();
  e->add_option("--out", ev.out, "Report JSON (default stdout)");

  EvalOptions ex;
  auto* x = app.add_subcommand("export-traj", "Per-sample true and predicted poses as CSV");
  x->add_option("--checkpoint", ex.checkpoint)->required();
  x->add_option("--manifest", ex.manifest)->required();
  x->add_option("--out", ex.out)->required();

  PredictOptions pr;
  auto* p = app.add_subcommand("predict", "Pose of a single image as JSON");
  p->add_option("--checkpoint", pr.checkpoint)->required();
  p->add_option("--image", pr.image)->required();

  AugmentOptions au;
  auto* a = app.add_subcommand("augment", "Append right-camera rows to a manifest");
  a->add_option("--manifest", au.manifest)->required();
  a->add_option("--extrinsic", au.extrinsic, "Left-to-right transform JSON")->check(CLI::ExistingFile);
  a->add_option("--baseline", au.baseline, "Baseline in meters along the left x axis");
  a->add_option("--out", au.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*g) return run_gen(gen);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*x) return run_export(ex);
    if (*p) return run_predict(pr);
    if (*a) return run_augment(au);
  } catch (const DivergenceError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 1;
}
