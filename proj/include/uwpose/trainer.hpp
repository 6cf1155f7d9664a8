#pragma once

// Mini-batch training of a PoseRegressor on the composite loss, plus the
// versioned checkpoint container.
//
// Checkpoint layout (all integers little-endian):
//
//   bytes 0..7    magic "UWPOSECK"
//   bytes 8..15   u64 header length H
//   next H bytes  UTF-8 JSON header: format_version, model_config,
//                 train_config, preprocess, normalization, epoch, last_loss,
//                 tensors [{name, shape, offset, count}], payload_bytes
//   payload       float64 little-endian tensor data at the declared offsets

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "uwpose/dataset.hpp"
#include "uwpose/loss.hpp"
#include "uwpose/model.hpp"

namespace uwpose {

enum class OptimizerKind { kSgdMomentum, kAdam };

const char* to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta = 30.0;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // epochs; 0 disables periodic checkpoints
  std::filesystem::path checkpoint_path;  // target for periodic checkpoints

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double mean_pos_err_m = 0.0;    // NaN when no eval set
  double mean_ori_err_deg = 0.0;  // NaN when no eval set
};

struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  ModelConfig model_config;
  std::vector<NamedTensor> parameters;
  NormalizationState normalization;
  PreprocessConfig preprocess;
  TrainConfig train_config;
  std::size_t epoch = 0;
  double last_loss = 0.0;

  PoseRegressor model() const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws FormatError for bad magic, unsupported versions, or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Parameter-update rules. One instance per training run.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Applies one update from the gradients stored on the tensors.
  virtual void step(std::vector<NamedTensor>& params) = 0;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::vector<NamedTensor>& params) override;

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

class SgdMomentum final : public Optimizer {
 public:
  explicit SgdMomentum(double lr, double momentum = 0.9) : lr_(lr), momentum_(momentum) {}
  void step(std::vector<NamedTensor>& params) override;

 private:
  double lr_, momentum_;
  std::vector<std::vector<double>> velocity_;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// `train` must be non-empty; `eval` may be empty. The normalization state is
// the one both sets were prepared with and is stored in the checkpoint.
TrainResult train(const ModelConfig& model_config, const PreparedSet& train, const PreparedSet& eval,
                  const NormalizationState& normalization, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Same, starting from existing parameters.
TrainResult train(PoseRegressor model, const PreparedSet& train, const PreparedSet& eval,
                  const NormalizationState& normalization, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// "epoch,mean_loss,mean_pos_err_m,mean_ori_err_deg" plus one row per epoch.
std::string history_to_csv(const std::vector<EpochStats>& history);

}  // namespace uwpose
