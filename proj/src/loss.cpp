#include "uwpose/loss.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "uwpose/errors.hpp"
#include "uwpose/ops.hpp"

namespace uwpose {

void LossConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
}

PoseTargets PoseTargets::from_rows(const std::vector<std::array<double, 7>>& rows) {
  if (rows.empty()) throw ConfigError("no target rows");
  std::vector<double> p, q;
  for (const auto& r : rows) {
    p.insert(p.end(), r.begin(), r.begin() + 3);
    q.insert(q.end(), r.begin() + 3, r.end());
  }
  return {ad::Tensor({rows.size(), 3}, std::move(p)), ad::Tensor({rows.size(), 4}, std::move(q))};
}

ad::Tensor composite_loss(const PoseOutput& pred, const PoseTargets& target, const LossConfig& cfg) {
  cfg.validate();
  for (const auto* t : {&pred.p_hat, &pred.q_hat}) {
    for (double v : t->data()) {
      if (!std::isfinite(v)) throw DivergenceError("non-finite pose prediction");
    }
  }
  const auto position_term = ad::row_l2_norm(ad::sub(target.position, pred.p_hat));
  const auto orientation_term = ad::row_l2_norm(ad::sub(target.orientation, pred.q_hat));
  return ad::mean(ad::add(position_term, ad::scale(orientation_term, cfg.beta)));
}

double position_error_m(const Pose& pred, const Pose& truth) {
  const double dx = pred.position[0] - truth.position[0];
  const double dy = pred.position[1] - truth.position[1];
  const double dz = pred.position[2] - truth.position[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

EvalReport evaluate_predictions(const std::vector<Pose>& truth, const PredictionRows& predictions,
                                const NormalizationState& state) {
  if (truth.empty()) throw ConfigError("cannot evaluate an empty test set");
  if (truth.size() != predictions.size()) throw ConfigError("prediction/label count mismatch");
  EvalReport report;
  report.count = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    Pose pred = denormalize_pose(predictions[i], state);
    pred.orientation = normalize(pred.orientation);
    report.position_errors_m.push_back(position_error_m(pred, truth[i]));
    report.orientation_errors_deg.push_back(angular_error_deg(truth[i].orientation, pred.orientation));
  }
  const double n = static_cast<double>(report.count);
  report.mean_position_m = std::accumulate(report.position_errors_m.begin(), report.position_errors_m.end(), 0.0) / n;
  report.mean_orientation_deg =
      std::accumulate(report.orientation_errors_deg.begin(), report.orientation_errors_deg.end(), 0.0) / n;
  return report;
}

PredictionRows predict(const PoseRegressor& model, const PreparedSet& set, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  PredictionRows rows;
  rows.reserve(set.size());
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(set.size(), start + batch_size); ++i) idx.push_back(i);
    const auto out = model.forward(batch_images(set, idx));
    for (std::size_t b = 0; b < idx.size(); ++b) {
      std::array<double, 7> r{};
      for (std::size_t k = 0; k < 3; ++k) r[k] = out.p_hat[b * 3 + k];
      for (std::size_t k = 0; k < 4; ++k) r[3 + k] = out.q_hat[b * 4 + k];
      rows.push_back(r);
    }
  }
  return rows;
}

EvalReport evaluate(const PoseRegressor& model, const PreparedSet& set, const NormalizationState& state,
                    std::size_t batch_size) {
  if (set.size() == 0) throw ConfigError("cannot evaluate an empty test set");
  return evaluate_predictions(set.poses, predict(model, set, batch_size), state);
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["count"] = report.count;
  j["mean_pos_m"] = report.mean_position_m;
  j["mean_ori_deg"] = report.mean_orientation_deg;
  auto per = nlohmann::json::array();
  for (std::size_t i = 0; i < report.count; ++i) {
    per.push_back({{"idx", i}, {"pos_err_m", report.position_errors_m[i]}, {"ori_err_deg", report.orientation_errors_deg[i]}});
  }
  j["per_sample"] = std::move(per);
  return j.dump(2);
}

}  // namespace uwpose
