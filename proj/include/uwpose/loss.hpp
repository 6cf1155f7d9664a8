#pragma once

// Composite position + orientation training loss and the evaluation metrics
// (mean position error in meters, mean geodesic orientation error in degrees).

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "uwpose/dataset.hpp"
#include "uwpose/geometry.hpp"
#include "uwpose/model.hpp"
#include "uwpose/tensor.hpp"

namespace uwpose {

struct LossConfig {
  double beta = 30.0;
  void validate() const;
};

struct PoseTargets {
  ad::Tensor position;     // [N,3], normalized
  ad::Tensor orientation;  // [N,4], unit, canonical hemisphere

  static PoseTargets from_rows(const std::vector<std::array<double, 7>>& rows);
};

// mean over the batch of  |p - p_hat|_2 + beta * |q - q_hat|_2.
// Throws DivergenceError if the prediction holds a non-finite value.
ad::Tensor composite_loss(const PoseOutput& pred, const PoseTargets& target, const LossConfig& cfg = {});

double position_error_m(const Pose& pred, const Pose& truth);

struct EvalReport {
  std::vector<double> position_errors_m;
  std::vector<double> orientation_errors_deg;
  double mean_position_m = 0.0;
  double mean_orientation_deg = 0.0;
  std::size_t count = 0;
};

// Raw network outputs for each sample, [p_hat (normalized), q_hat].
using PredictionRows = std::vector<std::array<double, 7>>;

// Denormalizes p_hat, normalizes q_hat, and scores against the world poses.
EvalReport evaluate_predictions(const std::vector<Pose>& truth, const PredictionRows& predictions,
                                const NormalizationState& state);

PredictionRows predict(const PoseRegressor& model, const PreparedSet& set, std::size_t batch_size = 16);

// Throws ConfigError on an empty set.
EvalReport evaluate(const PoseRegressor& model, const PreparedSet& set, const NormalizationState& state,
                    std::size_t batch_size = 16);

// {"count", "mean_pos_m", "mean_ori_deg", "per_sample": [{"idx","pos_err_m","ori_err_deg"}...]}
std::string report_to_json(const EvalReport& report);

}  // namespace uwpose
