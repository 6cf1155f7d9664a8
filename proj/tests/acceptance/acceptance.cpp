// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance --workdir DIR [--only 1,5,8]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geometry_oracle.hpp"
#include "image_oracle.hpp"
#include "oracles.hpp"
#include "uwpose/dataset.hpp"
#include "uwpose/errors.hpp"
#include "uwpose/geometry.hpp"
#include "uwpose/loss.hpp"
#include "uwpose/model.hpp"
#include "uwpose/ops.hpp"
#include "uwpose/rng.hpp"
#include "uwpose/serialize.hpp"
#include "uwpose/synthgen.hpp"
#include "uwpose/trainer.hpp"

using namespace uwpose;
using namespace uwpose::ad;
namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string num(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

json g_summary = json::object();

// ---------------------------------------------------------------------------
// 1. gradients

ModelConfig miniature(Backbone b, bool lstm) {
  ModelConfig c;
  c.backbone = b;
  c.conv_channels = {3, 4};
  c.use_lstm_reducer = lstm;
  c.lstm_hidden = 4;
  c.regressor_hidden = 5;
  c.input_size = 8;
  c.seed = 3;
  return c;
}

Outcome criterion_gradients() {
  Outcome out;
  const auto t0 = Clock::now();
  Rng rng(101);
  constexpr int kPoints = 10;
  const double tol = 1e-4;
  std::map<std::string, double> worst;

  // Each entry builds fresh leaves for one random point and returns them with
  // a scalar loss closure.
  using Case = std::function<std::pair<std::vector<Tensor>, std::function<Tensor()>>(Rng&)>;
  const auto project = [](Tensor y, std::uint64_t seed) { return sum(mul(y, oracle::projection_weights(y, seed))); };
  std::vector<std::pair<std::string, Case>> cases;
  const auto binary = [&](const std::string& name, Tensor (*op)(const Tensor&, const Tensor&)) {
    cases.push_back({name, [=](Rng& r) {
                       auto a = oracle::random_tensor(r, {3, 4}, true);
                       auto b = oracle::random_tensor(r, {3, 4}, true);
                       return std::pair{std::vector{a, b}, std::function<Tensor()>([=] { return project(op(a, b), 1); })};
                     }});
  };
  binary("add", add);
  binary("sub", sub);
  binary("mul", mul);
  const auto unary = [&](const std::string& name, std::function<Tensor(const Tensor&)> op, double lo, double hi) {
    cases.push_back({name, [=](Rng& r) {
                       auto a = oracle::random_tensor(r, {3, 5}, true, lo, hi);
                       return std::pair{std::vector{a}, std::function<Tensor()>([=] { return project(op(a), 2); })};
                     }});
  };
  unary("scale", [](const Tensor& a) { return scale(a, -1.7); }, -1, 1);
  // Away from the kink so the central difference is valid.
  unary("relu", [](const Tensor& a) { return relu(a); }, 0.05, 1.0);
  unary("relu_negative", [](const Tensor& a) { return relu(a); }, -1.0, -0.05);
  unary("tanh", [](const Tensor& a) { return ad::tanh(a); }, -2, 2);
  unary("sigmoid", [](const Tensor& a) { return sigmoid(a); }, -3, 3);
  unary("sum", [](const Tensor& a) { return mul(sum(a), sum(a)); }, -1, 1);
  unary("mean", [](const Tensor& a) { return mul(mean(a), mean(a)); }, -1, 1);
  unary("row_l2_norm", [](const Tensor& a) { return row_l2_norm(a); }, -1, 1);
  unary("reshape", [](const Tensor& a) { return reshape(a, {5, 3}); }, -1, 1);
  cases.push_back({"broadcast_mul", [&](Rng& r) {
                     auto a = oracle::random_tensor(r, {3, 4}, true);
                     auto s = oracle::random_tensor(r, {1}, true);
                     return std::pair{std::vector{a, s}, std::function<Tensor()>([=] { return project(mul(a, s), 3); })};
                   }});
  cases.push_back({"dense", [&](Rng& r) {
                     auto x = oracle::random_tensor(r, {3, 5}, true);
                     auto w = oracle::random_tensor(r, {5, 4}, true);
                     auto b = oracle::random_tensor(r, {4}, true);
                     return std::pair{std::vector{x, w, b},
                                      std::function<Tensor()>([=] { return project(dense(x, w, b), 4); })};
                   }});
  cases.push_back({"conv2d", [&](Rng& r) {
                     auto x = oracle::random_tensor(r, {2, 2, 5, 5}, true);
                     auto k = oracle::random_tensor(r, {3, 2, 3, 3}, true);
                     auto b = oracle::random_tensor(r, {3}, true);
                     return std::pair{std::vector{x, k, b},
                                      std::function<Tensor()>([=] { return project(conv2d(x, k, b, 2, 1), 5); })};
                   }});
  cases.push_back({"maxpool2d", [&](Rng& r) {
                     auto x = oracle::random_tensor(r, {2, 2, 4, 4}, true);
                     return std::pair{std::vector{x}, std::function<Tensor()>([=] { return project(maxpool2d(x, 2, 2), 6); })};
                   }});
  cases.push_back({"global_avgpool_flatten", [&](Rng& r) {
                     auto x = oracle::random_tensor(r, {2, 3, 3, 3}, true);
                     return std::pair{std::vector{x}, std::function<Tensor()>([=] {
                                        return add(project(global_avgpool(x), 7), project(flatten(x), 8));
                                      })};
                   }});
  cases.push_back({"gather_cell_concat", [&](Rng& r) {
                     auto x = oracle::random_tensor(r, {2, 3, 3, 4}, true);
                     auto y = oracle::random_tensor(r, {2, 2}, true);
                     return std::pair{std::vector{x, y}, std::function<Tensor()>([=] {
                                        return project(concat({gather_cell(x, 1, 2), y, gather_cell(x, 2, 0)}, 1), 9);
                                      })};
                   }});
  cases.push_back({"lstm_cell", [&](Rng& r) {
                     const std::size_t n = 2, din = 3, dh = 4;
                     auto x0 = oracle::random_tensor(r, {n, din}, true);
                     auto x1 = oracle::random_tensor(r, {n, din}, true);
                     auto h = oracle::random_tensor(r, {n, dh}, true);
                     auto c = oracle::random_tensor(r, {n, dh}, true);
                     LstmParams p{oracle::random_tensor(r, {din, 4 * dh}, true), oracle::random_tensor(r, {dh, 4 * dh}, true),
                                  oracle::random_tensor(r, {4 * dh}, true)};
                     return std::pair{std::vector{x0, x1, h, c, p.w_input, p.w_hidden, p.bias},
                                      std::function<Tensor()>([=] {
                                        auto s = lstm_cell(x1, lstm_cell(x0, {h, c}, p), p);
                                        return add(project(s.h, 10), project(s.c, 11));
                                      })};
                   }});
  cases.push_back({"composite_loss", [&](Rng& r) {
                     PoseOutput o{oracle::random_tensor(r, {3, 3}, true), oracle::random_tensor(r, {3, 4}, true)};
                     PoseTargets t{oracle::random_tensor(r, {3, 3}), oracle::random_tensor(r, {3, 4})};
                     return std::pair{std::vector{o.p_hat, o.q_hat},
                                      std::function<Tensor()>([=] { return composite_loss(o, t); })};
                   }});
  for (auto [name, b, lstm] : {std::tuple{"model_baseline", Backbone::kPlain, false},
                               std::tuple{"model_residual", Backbone::kResidual, false},
                               std::tuple{"model_lstm", Backbone::kPlain, true}}) {
    cases.push_back({name, [=](Rng& r) {
                       auto model = std::make_shared<PoseRegressor>(miniature(b, lstm));
                       for (auto& p : model->parameters())
                         for (auto& v : p.tensor.mutable_data()) v = r.uniform(-0.5, 0.5);
                       auto x = oracle::random_tensor(r, {2, 3, 8, 8}, true);
                       PoseTargets t{oracle::random_tensor(r, {2, 3}), oracle::random_tensor(r, {2, 4})};
                       std::vector<Tensor> leaves{x};
                       for (auto& p : model->parameters()) leaves.push_back(p.tensor);
                       return std::pair{leaves, std::function<Tensor()>([=] { return composite_loss(model->forward(x), t); })};
                     }});
  }

  for (auto& [name, make] : cases) {
    double w = 0.0;
    for (int point = 0; point < kPoints; ++point) {
      auto [leaves, loss] = make(rng);
      w = std::max(w, oracle::gradient_check(leaves, loss));
    }
    worst[name] = w;
    out.require(w < tol, name + " relative error " + num(w));
  }
  const double secs = seconds_since(t0);
  out.require(secs < 120.0, "runtime " + num(secs) + " s exceeds 120 s");
  const auto max_it = std::max_element(worst.begin(), worst.end(), [](auto& a, auto& b) { return a.second < b.second; });
  out.note(std::to_string(cases.size()) + " ops/models x " + std::to_string(kPoints) + " points, worst " + max_it->first +
           " " + num(max_it->second, 3) + ", " + num(secs, 3) + " s");
  g_summary["1"] = {{"worst", worst}, {"seconds", secs}};
  return out;
}

// ---------------------------------------------------------------------------
// 2. naive-loop oracles

std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Outcome criterion_oracles() {
  Outcome out;
  const auto t0 = Clock::now();
  Rng rng(202);
  int count = 0;
  double worst = 0.0;
  const auto track = [&](double d, const std::string& what) {
    ++count;
    worst = std::max(worst, d);
    out.require(d <= 1e-12, what + " differs by " + num(d));
  };
  for (int i = 0; i < 40; ++i) {
    const std::size_t n = 1 + rng.below(2), c = 1 + rng.below(3), f = 1 + rng.below(4);
    const std::size_t kh = 1 + rng.below(3), kw = 1 + rng.below(3), stride = 1 + rng.below(2), pad = rng.below(2);
    const std::size_t h = kh + rng.below(5), w = kw + rng.below(5);
    auto x = oracle::random_tensor(rng, {n, c, h, w});
    auto k = oracle::random_tensor(rng, {f, c, kh, kw});
    auto b = oracle::random_tensor(rng, {f});
    const auto ref = oracle::conv2d(vec(x), n, c, h, w, vec(k), f, kh, kw, vec(b), stride, pad);
    track(oracle::max_abs_diff(vec(conv2d(x, k, b, stride, pad)), ref), "conv2d");
  }
  for (int i = 0; i < 30; ++i) {
    const std::size_t n = 1 + rng.below(4), d = 1 + rng.below(9), m = 1 + rng.below(7);
    auto x = oracle::random_tensor(rng, {n, d});
    auto w = oracle::random_tensor(rng, {d, m});
    auto b = oracle::random_tensor(rng, {m});
    track(oracle::max_abs_diff(vec(dense(x, w, b)), oracle::dense(vec(x), n, d, vec(w), m, vec(b))), "dense");
  }
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = 1 + rng.below(3), din = 1 + rng.below(5), dh = 1 + rng.below(5);
    auto x = oracle::random_tensor(rng, {n, din});
    auto h = oracle::random_tensor(rng, {n, dh});
    auto c = oracle::random_tensor(rng, {n, dh});
    LstmParams p{oracle::random_tensor(rng, {din, 4 * dh}), oracle::random_tensor(rng, {dh, 4 * dh}),
                 oracle::random_tensor(rng, {4 * dh})};
    const auto got = lstm_cell(x, {h, c}, p);
    const auto ref = oracle::lstm_step(vec(x), vec(h), vec(c), vec(p.w_input), vec(p.w_hidden), vec(p.bias), n, din, dh);
    track(std::max(oracle::max_abs_diff(vec(got.h), ref.h), oracle::max_abs_diff(vec(got.c), ref.c)), "lstm_cell");
  }
  for (int i = 0; i < 30; ++i) {
    const std::size_t n = 1 + rng.below(2), c = 1 + rng.below(3), size = 1 + rng.below(3), stride = 1 + rng.below(2);
    const std::size_t h = size + rng.below(5), w = size + rng.below(5);
    auto x = oracle::random_tensor(rng, {n, c, h, w});
    track(oracle::max_abs_diff(vec(maxpool2d(x, size, stride)), oracle::maxpool(vec(x), n * c, h, w, size, stride)),
          "maxpool2d");
    track(oracle::max_abs_diff(vec(global_avgpool(x)), oracle::avgpool(vec(x), n * c, h * w)), "global_avgpool");
  }
  const double secs = seconds_since(t0);
  out.require(count >= 100, "only " + std::to_string(count) + " cases");
  out.require(secs < 60.0, "runtime " + num(secs) + " s exceeds 60 s");
  out.note(std::to_string(count) + " randomized cases, worst |diff| " + num(worst, 3) + ", " + num(secs, 3) + " s");
  g_summary["2"] = {{"cases", count}, {"worst", worst}, {"seconds", secs}};
  return out;
}

// ---------------------------------------------------------------------------
// 3. loss and metric values

Outcome criterion_loss_metric() {
  Outcome out;
  const PoseTargets t{Tensor({1, 3}, {0.1, 0.2, 0.3}), Tensor({1, 4}, {1, 0, 0, 0})};
  const PoseOutput p{Tensor({1, 3}, {0.16, 0.28, 0.3}), Tensor({1, 4}, {0.97, 0.04, 0, 0})};
  const double l = composite_loss(p, t).item();
  out.require(std::abs(l - 1.6) <= 1e-12, "composite loss " + num(l, 17) + " != 1.6");
  const PoseOutput exact{Tensor({1, 3}, {0.1, 0.2, 0.3}), Tensor({1, 4}, {1, 0, 0, 0})};
  out.require(composite_loss(exact, t).item() == 0.0, "loss of an exact prediction is not 0");
  const PoseTargets t2{Tensor({2, 3}, {0, 0, 0, 0, 0, 0}), Tensor({2, 4}, {1, 0, 0, 0, 1, 0, 0, 0})};
  const PoseOutput p2{Tensor({2, 3}, {3, 4, 0, 0, 0, 0}), Tensor({2, 4}, {1, 0, 0, 0, 1, 0, 0, 1})};
  const double l2 = composite_loss(p2, t2).item();
  out.require(std::abs(l2 - 17.5) <= 1e-12, "batch mean loss " + num(l2, 17) + " != 17.5");

  Rng rng(303);
  double worst_zero = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto q = oracle::random_unit_quaternion(rng);
    const Quaternion neg{-q.w, -q.x, -q.y, -q.z};
    worst_zero = std::max({worst_zero, angular_error_deg(q, q), angular_error_deg(q, neg)});
  }
  out.require(worst_zero <= 1e-9, "angular error for q_hat = +-q is " + num(worst_zero));
  const double h = std::sqrt(0.5);
  const Quaternion z90{h, 0, 0, h};
  const double a = angular_error_deg({}, z90);
  const double matrix = oracle::matrix_angle_deg(oracle::rotation({}), oracle::rotation(z90));
  out.require(std::abs(a - 90.0) <= 1e-9, "90 deg z rotation gives " + num(a, 17));
  out.require(std::abs(matrix - 90.0) <= 1e-9, "matrix oracle gives " + num(matrix, 17));
  out.note("loss " + num(l, 17) + ", z90 " + num(a, 17) + " deg, max +-q error " + num(worst_zero, 3) + " deg");
  g_summary["3"] = {{"loss", l}, {"z90_deg", a}, {"max_zero_deg", worst_zero}};
  return out;
}

// ---------------------------------------------------------------------------
// 4. preprocessing

Outcome criterion_preprocessing() {
  Outcome out;
  // 256 input: the resize is the identity, so the crop is the source window at (16,16).
  Rng rng(404);
  RgbImage img(256, 256);
  for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.below(256));
  const auto crop = resize_and_crop(img, PreprocessConfig{});
  std::size_t mismatches = 0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 224; ++y)
      for (std::size_t x = 0; x < 224; ++x)
        if (crop[(c * 224 + y) * 224 + x] != img.at(y + 16, x + 16, c) / 255.0) ++mismatches;
  out.require(mismatches == 0, std::to_string(mismatches) + " crop pixels differ from the (16,16) window");

  double worst = 0.0;
  for (auto [size, cell] : {std::pair{512, 7}, std::pair{300, 5}, std::pair{97, 3}}) {
    const auto board = oracle::checkerboard(size, cell);
    const auto got = resize_and_crop(board, PreprocessConfig{});
    worst = std::max(worst, oracle::max_abs_diff(got, oracle::reference_resize_crop(board, 256, 224)));
  }
  out.require(worst <= 1e-9, "resize differs from the bilinear oracle by " + num(worst));

  NormalizationState s;
  s.pos_min = {0.0, -1.0, 0.5};
  s.pos_max = {2.0, 4.0, 1.5};
  double round_trip = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Pose p{{rng.uniform(0, 2), rng.uniform(-1, 4), rng.uniform(0.5, 1.5)}, canonicalize(oracle::random_unit_quaternion(rng))};
    const auto back = denormalize_pose(normalize_pose(p, s).values, s);
    for (int k = 0; k < 3; ++k) round_trip = std::max(round_trip, std::abs(back.position[k] - p.position[k]));
  }
  out.require(round_trip <= 1e-12, "pose normalization round trip error " + num(round_trip));
  out.note("crop exact, resize vs oracle " + num(worst, 3) + ", pose round trip " + num(round_trip, 3));
  g_summary["4"] = {{"resize_worst", worst}, {"round_trip", round_trip}};
  return out;
}

// ---------------------------------------------------------------------------
// 5, 6, 8. training experiments

// Low-resolution version of the 256/224 pipeline for the 64 px renders.
const PreprocessConfig kLowRes{64, 56};

ModelConfig experiment_model(Backbone b, bool lstm) {
  ModelConfig c;
  c.backbone = b;
  c.conv_channels = {16, 32, 32};
  c.use_lstm_reducer = lstm;
  c.lstm_hidden = 32;
  c.regressor_hidden = 128;
  c.input_size = kLowRes.crop;
  c.seed = 11;
  return c;
}

TrainConfig experiment_training() {
  TrainConfig t;
  t.epochs = 50;
  t.batch_size = 8;
  t.learning_rate = 1e-3;
  t.seed = 11;
  return t;
}

struct Experiment {
  std::string name;
  TrainResult result;
  EvalReport report;
  double seconds = 0.0;
};

struct Prepared {
  PreparedSet train;
  PreparedSet test;
  NormalizationState norm;
};

Prepared prepare_split(const std::vector<SampleRecord>& train, const std::vector<SampleRecord>& test) {
  Prepared p;
  p.norm = compute_pose_extent(train, compute_normalization(train, kLowRes));
  p.train = prepare(train, p.norm, kLowRes);
  p.test = prepare(test, p.norm, kLowRes);
  return p;
}

Experiment run_experiment(const std::string& name, const ModelConfig& mc, const Prepared& data,
                          const TrainConfig& tc = experiment_training()) {
  Experiment e{name, {}, {}, 0.0};
  const auto t0 = Clock::now();
  e.result = train(mc, data.train, data.test, data.norm, tc, [&](const EpochStats& s) {
    if (s.epoch % 10 == 0 || s.epoch == 1) {
      std::fprintf(stderr, "  %s epoch %zu loss %.4f pos %.3f m ori %.2f deg\n", name.c_str(), s.epoch, s.mean_loss,
                   s.mean_pos_err_m, s.mean_ori_err_deg);
    }
  });
  e.seconds = seconds_since(t0);
  e.report = evaluate(e.result.checkpoint.model(), data.test, data.norm);
  return e;
}

std::vector<Experiment> g_models;  // criterion 5 results, reused by criterion 8
fs::path g_workdir;

Outcome criterion_reproduction() {
  Outcome out;
  auto spec = synth::preset("sim-spiral");
  spec.trajectory.sample_count = 700;
  const auto manifest = synth::generate_dataset(spec, g_workdir / "spiral");
  const auto records = load_manifest(manifest);
  const auto [train_recs, test_recs] = split(records, 600.0 / 700.0, 5);
  out.require(train_recs.size() == 600 && test_recs.size() == 100, "split is not 600/100");
  const auto& e = spec.scene.extent;
  const double diagonal = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
  const double pos_limit = 0.1 * diagonal, ori_limit = 10.0;
  const auto data = prepare_split(train_recs, test_recs);

  json results = json::object();
  for (auto [name, b, lstm] : {std::tuple{"baseline", Backbone::kPlain, false},
                               std::tuple{"residual", Backbone::kResidual, false},
                               std::tuple{"lstm", Backbone::kPlain, true}}) {
    auto ex = run_experiment(name, experiment_model(b, lstm), data);
    const auto& r = ex.report;
    out.require(r.mean_position_m <= pos_limit, std::string(name) + " position " + num(r.mean_position_m) + " m > " +
                                                   num(pos_limit) + " m");
    out.require(r.mean_orientation_deg <= ori_limit,
                std::string(name) + " orientation " + num(r.mean_orientation_deg) + " deg > 10 deg");
    out.require(ex.seconds <= 900.0, std::string(name) + " took " + num(ex.seconds) + " s");
    out.note(std::string(name) + " " + num(r.mean_position_m, 3) + " m / " + num(r.mean_orientation_deg, 3) + " deg in " +
             num(ex.seconds, 3) + " s");
    results[name] = {{"mean_pos_m", r.mean_position_m},
                     {"mean_ori_deg", r.mean_orientation_deg},
                     {"seconds", ex.seconds},
                     {"final_loss", ex.result.history.back().mean_loss}};
    std::ofstream(g_workdir / ("spiral_" + std::string(name) + "_history.csv")) << history_to_csv(ex.result.history);
    g_models.push_back(std::move(ex));
  }

  // Same seed, same data: the history must repeat bit for bit.
  const auto again = train(experiment_model(Backbone::kPlain, false), data.train, data.test, data.norm, experiment_training());
  bool identical = again.history.size() == g_models[0].result.history.size();
  for (std::size_t i = 0; identical && i < again.history.size(); ++i) {
    const auto& a = again.history[i];
    const auto& b = g_models[0].result.history[i];
    identical = a.mean_loss == b.mean_loss && a.mean_pos_err_m == b.mean_pos_err_m && a.mean_ori_err_deg == b.mean_ori_err_deg;
  }
  out.require(identical, "baseline loss history differs between two runs with the same seed");
  out.note(std::string("history repeat ") + (identical ? "bit-exact" : "differs") + "; limits " + num(pos_limit, 3) +
           " m / 10 deg");
  results["diagonal_m"] = diagonal;
  results["reproducible"] = identical;
  g_summary["5"] = results;
  return out;
}

Outcome criterion_stereo() {
  Outcome out;
  auto spec = synth::preset("tank-lawnmower");
  spec.trajectory.sample_count = 300;
  spec.stereo = synth::default_stereo_extrinsic();
  const auto manifest = synth::generate_dataset(spec, g_workdir / "lawnmower");
  std::vector<SampleRecord> left;
  for (const auto& r : load_manifest(manifest))
    if (r.camera == CameraId::kLeft) left.push_back(r);
  const auto [train_left, test_left] = split(left, 0.8, 6);

  const auto augmented = augment_stereo(train_left, *spec.stereo);
  out.require(augmented.failures.empty(), std::to_string(augmented.failures.size()) + " right images missing");
  out.require(augmented.records.size() == 2 * train_left.size(), "augmented set is not twice the left set");

  // One run swings by more than the margin, so compare means over paired seeds.
  const auto plain_data = prepare_split(train_left, test_left);
  const auto aug_data = prepare_split(augmented.records, test_left);
  double u = 0.0, a = 0.0;
  json pairs = json::array();
  std::string per_seed;
  for (const std::uint64_t seed : {11, 12, 13}) {
    auto mc = experiment_model(Backbone::kPlain, false);
    auto tc = experiment_training();
    mc.seed = tc.seed = seed;
    const auto s = std::to_string(seed);
    const double pu = run_experiment("left-only seed " + s, mc, plain_data, tc).report.mean_position_m;
    const double pa = run_experiment("augmented seed " + s, mc, aug_data, tc).report.mean_position_m;
    u += pu / 3.0;
    a += pa / 3.0;
    pairs.push_back({{"seed", seed}, {"left_only_pos_m", pu}, {"augmented_pos_m", pa}, {"ratio", pa / pu}});
    per_seed += (per_seed.empty() ? "" : ", ") + s + ": " + num(pa / pu, 3);
  }
  out.require(a <= 1.05 * u, "mean augmented " + num(a) + " m > 1.05 x mean left-only " + num(u) + " m");
  out.note("mean left-only " + num(u, 3) + " m, mean augmented " + num(a, 3) + " m (ratio " + num(a / u, 3) +
           "); per-seed ratios " + per_seed + "; " + std::to_string(train_left.size()) + " vs " +
           std::to_string(augmented.records.size()) + " training images");
  g_summary["6"] = {{"left_only_pos_m", u}, {"augmented_pos_m", a}, {"ratio", a / u}, {"pairs", pairs}};
  return out;
}

// ---------------------------------------------------------------------------
// 7. geometry

Outcome criterion_geometry() {
  Outcome out;
  Rng rng(707);
  double compose_err = 0.0, right_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::random_transform(rng), b = oracle::random_transform(rng);
    compose_err = std::max(compose_err, oracle::max_abs_diff(oracle::homogeneous(compose(a, b)),
                                                             oracle::mat_mul(oracle::homogeneous(a), oracle::homogeneous(b))));
    const auto lt = oracle::random_transform(rng);
    const Pose left{lt.translation, canonicalize(lt.rotation)};
    const auto ext = oracle::random_transform(rng, 0.2);
    right_err = std::max(right_err, oracle::max_abs_diff(oracle::homogeneous(to_transform(right_camera_pose(left, ext))),
                                                         oracle::mat_mul(oracle::homogeneous(to_transform(left)),
                                                                         oracle::homogeneous(ext))));
  }
  out.require(compose_err <= 1e-12, "compose vs 4x4 oracle " + num(compose_err));
  out.require(right_err <= 1e-12, "right_camera_pose vs 4x4 oracle " + num(right_err));

  double asym = 0.0, self = 0.0, neg = 0.0, tri = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::random_unit_quaternion(rng), b = oracle::random_unit_quaternion(rng),
               c = oracle::random_unit_quaternion(rng);
    const double ab = angular_error_deg(a, b);
    asym = std::max(asym, std::abs(ab - angular_error_deg(b, a)));
    self = std::max(self, angular_error_deg(a, a));
    neg = std::max(neg, std::abs(ab - angular_error_deg(a, {-b.w, -b.x, -b.y, -b.z})));
    tri = std::max(tri, ab - (angular_error_deg(a, c) + angular_error_deg(c, b)));
  }
  // Symmetry and negation hold up to rounding of the quaternion product.
  out.require(asym <= 1e-9, "symmetry violated by " + num(asym));
  out.require(self <= 1e-9, "d(q,q) = " + num(self));
  out.require(neg <= 1e-9, "negation changes the metric by " + num(neg));
  out.require(tri <= 1e-9, "triangle inequality violated by " + num(tri));
  out.note("compose " + num(compose_err, 3) + ", right camera " + num(right_err, 3) + ", symmetry " + num(asym, 3) +
           ", d(q,q) " + num(self, 3) + ", negation " + num(neg, 3) + ", triangle slack " + num(tri, 3));
  g_summary["7"] = {{"compose", compose_err}, {"right", right_err}, {"symmetry", asym}, {"identity", self},
                    {"negation", neg}, {"triangle", tri}};
  return out;
}

// ---------------------------------------------------------------------------
// 8. checkpoints

Outcome criterion_checkpoints() {
  Outcome out;
  std::vector<Experiment> local;
  const std::vector<Experiment>* models = &g_models;
  PreparedSet eval_set;
  NormalizationState norm;
  if (g_models.empty()) {
    // Criterion 5 did not run: train short models on a small spiral set.
    auto spec = synth::preset("sim-spiral");
    spec.trajectory.sample_count = 60;
    const auto records = load_manifest(synth::generate_dataset(spec, g_workdir / "spiral_small"));
    const auto [tr, te] = split(records, 0.8, 5);
    const auto data = prepare_split(tr, te);
    auto cfg = experiment_training();
    cfg.epochs = 2;
    for (auto [name, b, lstm] : {std::tuple{"baseline", Backbone::kPlain, false},
                                 std::tuple{"residual", Backbone::kResidual, false},
                                 std::tuple{"lstm", Backbone::kPlain, true}}) {
      Experiment e{name, train(experiment_model(b, lstm), data.train, data.test, data.norm, cfg), {}, 0.0};
      local.push_back(std::move(e));
    }
    models = &local;
    eval_set = data.test;
    norm = data.norm;
  } else {
    const auto records = load_manifest(g_workdir / "spiral" / "manifest.csv");
    const auto [tr, te] = split(records, 600.0 / 700.0, 5);
    norm = g_models.front().result.checkpoint.normalization;
    eval_set = prepare(te, norm, kLowRes);
  }
  for (const auto& m : *models) {
    const auto path = g_workdir / (m.name + ".ckpt");
    const auto before = evaluate(m.result.checkpoint.model(), eval_set, norm);
    save_checkpoint(path, m.result.checkpoint);
    const auto loaded = load_checkpoint(path);
    const auto after = evaluate(loaded.model(), eval_set, loaded.normalization);
    const bool same = before.position_errors_m == after.position_errors_m &&
                      before.orientation_errors_deg == after.orientation_errors_deg &&
                      before.mean_position_m == after.mean_position_m &&
                      before.mean_orientation_deg == after.mean_orientation_deg;
    out.require(same, m.name + " evaluation changed after save/load");
    out.note(m.name + (same ? " identical" : " differs") + " (" + std::to_string(fs::file_size(path)) + " bytes)");
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--workdir" && i + 1 < argc) {
      g_workdir = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance --workdir DIR [--only 1,2,...]\n";
      return 2;
    }
  }
  if (g_workdir.empty()) g_workdir = fs::temp_directory_path() / "uwpose_acceptance";
  fs::create_directories(g_workdir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", criterion_gradients},
      {"oracle equivalence", criterion_oracles},
      {"loss and metric exactness", criterion_loss_metric},
      {"preprocessing exactness", criterion_preprocessing},
      {"scaled-down reproduction", criterion_reproduction},
      {"stereo augmentation non-inferiority", criterion_stereo},
      {"geometry suite", criterion_geometry},
      {"checkpoint integrity", criterion_checkpoints},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failures;
    std::string detail;
    for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": " << detail
              << std::endl;
  }
  std::ofstream(g_workdir / "acceptance_summary.json") << g_summary.dump(2) << "\n";
  return failures == 0 ? 0 : 1;
}
