#pragma once

// Pose regression networks: a strided conv backbone (plain or with residual
// blocks), an optional four-direction LSTM reducer, and a dense regressor
// with separate position and orientation heads.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uwpose/ops.hpp"
#include "uwpose/tensor.hpp"

namespace uwpose {

enum class Backbone { kPlain, kResidual };

const char* to_string(Backbone b);
Backbone backbone_from_string(const std::string& s);

struct FeatureGrid {
  std::size_t channels = 0, height = 0, width = 0;
  bool operator==(const FeatureGrid&) const = default;
};

struct ModelConfig {
  Backbone backbone = Backbone::kPlain;
  // One 3x3 stride-2 conv per entry; the residual variant follows each with a
  // two-conv identity-skip block.
  std::vector<std::size_t> conv_channels{8, 16, 32, 32, 32};
  bool use_lstm_reducer = false;
  std::size_t lstm_hidden = 32;
  std::size_t regressor_hidden = 128;
  std::size_t input_size = 224;
  std::uint64_t seed = 0;

  // Backbone output for an input_size x input_size image.
  FeatureGrid feature_grid() const;
  // Width of the regressor input.
  std::size_t feature_dim() const;
  // Throws ConfigError.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct PoseOutput {
  ad::Tensor p_hat;  // [N,3], normalized position
  ad::Tensor q_hat;  // [N,4], raw (unnormalized) quaternion
};

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

// Grid traversal for one of the four reducer scans. Every scan visits all
// H*W cells as a single sequence.
enum class ScanCorner {
  kTopLeft,      // row-major
  kTopRight,     // row-major, columns reversed
  kBottomLeft,   // column-major, rows reversed
  kBottomRight,  // row-major, fully reversed
};
inline constexpr std::array<ScanCorner, 4> kScanCorners{ScanCorner::kTopLeft, ScanCorner::kTopRight,
                                                        ScanCorner::kBottomLeft, ScanCorner::kBottomRight};

std::vector<std::pair<std::size_t, std::size_t>> scan_order(ScanCorner corner, std::size_t height, std::size_t width);

// [N,C,H,W] -> [N, 4*Dh]: final hidden state of each scan, concatenated in
// kScanCorners order.
ad::Tensor lstm_reduce(const ad::Tensor& features, const std::array<ad::LstmParams, 4>& scans);

class PoseRegressor {
 public:
  // Fresh, seeded initialization.
  explicit PoseRegressor(ModelConfig config);
  // Restores parameters; names and shapes must match the config's layout.
  PoseRegressor(ModelConfig config, std::vector<NamedTensor> parameters);

  const ModelConfig& config() const { return config_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  std::vector<NamedTensor>& parameters() { return params_; }
  const ad::Tensor& parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  ad::Tensor backbone_forward(const ad::Tensor& images) const;
  ad::Tensor lstm_reduce(const ad::Tensor& features) const;
  PoseOutput regress(const ad::Tensor& features) const;
  // backbone -> (lstm_reduce | flatten) -> regress
  PoseOutput forward(const ad::Tensor& images) const;

  std::array<ad::LstmParams, 4> lstm_params() const;

 private:
  ModelConfig config_;
  std::vector<NamedTensor> params_;
};

// Expected parameter names and shapes for a config, in storage order.
std::vector<std::pair<std::string, ad::Shape>> parameter_layout(const ModelConfig& config);

}  // namespace uwpose
