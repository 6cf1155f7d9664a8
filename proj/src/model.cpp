#include "uwpose/model.hpp"

#include <cmath>

#include "uwpose/errors.hpp"
#include "uwpose/rng.hpp"

namespace uwpose {

const char* to_string(Backbone b) { return b == Backbone::kPlain ? "plain" : "residual"; }

Backbone backbone_from_string(const std::string& s) {
  if (s == "plain" || s == "baseline") return Backbone::kPlain;
  if (s == "residual") return Backbone::kResidual;
  throw ConfigError("unknown backbone '" + s + "' (expected plain/baseline or residual)");
}

namespace {

constexpr std::size_t kKernel = 3;

std::size_t strided_extent(std::size_t in) { return (in + 2 - kKernel) / 2 + 1; }

std::string stage_name(const char* prefix, std::size_t i) { return prefix + std::to_string(i); }

}  // namespace

FeatureGrid ModelConfig::feature_grid() const {
  FeatureGrid g{3, input_size, input_size};
  for (auto ch : conv_channels) {
    g.channels = ch;
    g.height = strided_extent(g.height);
    g.width = strided_extent(g.width);
  }
  return g;
}

std::size_t ModelConfig::feature_dim() const {
  if (use_lstm_reducer) return 4 * lstm_hidden;
  const auto g = feature_grid();
  return g.channels * g.height * g.width;
}

void ModelConfig::validate() const {
  if (conv_channels.empty()) throw ConfigError("model needs at least one conv stage");
  for (auto c : conv_channels) {
    if (c == 0) throw ConfigError("conv channel counts must be positive");
  }
  if (input_size < 2) throw ConfigError("input_size must be at least 2");
  if (regressor_hidden == 0) throw ConfigError("regressor_hidden must be positive");
  if (use_lstm_reducer && lstm_hidden == 0) throw ConfigError("lstm_hidden must be positive");
}

std::vector<std::pair<std::size_t, std::size_t>> scan_order(ScanCorner corner, std::size_t height, std::size_t width) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  cells.reserve(height * width);
  switch (corner) {
    case ScanCorner::kTopLeft:
      for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) cells.emplace_back(r, c);
      break;
    case ScanCorner::kTopRight:
      for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = width; c-- > 0;) cells.emplace_back(r, c);
      break;
    case ScanCorner::kBottomLeft:
      for (std::size_t c = 0; c < width; ++c)
        for (std::size_t r = height; r-- > 0;) cells.emplace_back(r, c);
      break;
    case ScanCorner::kBottomRight:
      for (std::size_t r = height; r-- > 0;)
        for (std::size_t c = width; c-- > 0;) cells.emplace_back(r, c);
      break;
  }
  return cells;
}

ad::Tensor lstm_reduce(const ad::Tensor& features, const std::array<ad::LstmParams, 4>& scans) {
  if (features.rank() != 4) throw ShapeError("lstm_reduce: expected [N,C,H,W], got " + ad::to_string(features.shape()));
  const std::size_t n = features.dim(0), h = features.dim(2), w = features.dim(3);
  std::vector<ad::Tensor> finals;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& p = scans[k];
    const std::size_t dh = p.hidden_size();
    ad::LstmState state{ad::Tensor::zeros({n, dh}), ad::Tensor::zeros({n, dh})};
    for (const auto& [r, c] : scan_order(kScanCorners[k], h, w)) {
      state = ad::lstm_cell(ad::gather_cell(features, r, c), state, p);
    }
    finals.push_back(state.h);
  }
  return ad::concat(finals, 1);
}

std::vector<std::pair<std::string, ad::Shape>> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, ad::Shape>> layout;
  std::size_t in_ch = 3;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    const std::size_t ch = cfg.conv_channels[i];
    layout.push_back({stage_name("conv", i) + ".weight", {ch, in_ch, kKernel, kKernel}});
    layout.push_back({stage_name("conv", i) + ".bias", {ch}});
    if (cfg.backbone == Backbone::kResidual) {
      for (const char* half : {"a", "b"}) {
        layout.push_back({stage_name("res", i) + half + ".weight", {ch, ch, kKernel, kKernel}});
        layout.push_back({stage_name("res", i) + half + ".bias", {ch}});
      }
    }
    in_ch = ch;
  }
  if (cfg.use_lstm_reducer) {
    const std::size_t dh = cfg.lstm_hidden;
    for (std::size_t k = 0; k < 4; ++k) {
      layout.push_back({stage_name("lstm", k) + ".w_input", {in_ch, 4 * dh}});
      layout.push_back({stage_name("lstm", k) + ".w_hidden", {dh, 4 * dh}});
      layout.push_back({stage_name("lstm", k) + ".bias", {4 * dh}});
    }
  }
  const std::size_t d = cfg.feature_dim(), hid = cfg.regressor_hidden;
  layout.push_back({"fc.weight", {d, hid}});
  layout.push_back({"fc.bias", {hid}});
  layout.push_back({"pos.weight", {hid, 3}});
  layout.push_back({"pos.bias", {3}});
  layout.push_back({"rot.weight", {hid, 4}});
  layout.push_back({"rot.bias", {4}});
  return layout;
}

PoseRegressor::PoseRegressor(ModelConfig config) : config_(std::move(config)) {
  const auto layout = parameter_layout(config_);
  for (std::size_t idx = 0; idx < layout.size(); ++idx) {
    const auto& [name, shape] = layout[idx];
    Rng rng(mix_seed(config_.seed, idx));
    std::vector<double> values(ad::numel(shape), 0.0);
    const bool is_bias = name.ends_with(".bias");
    if (name.starts_with("lstm")) {
      const double dh = static_cast<double>(config_.lstm_hidden);
      const double bound = 1.0 / std::sqrt(dh);
      if (is_bias) {
        // Gate order (i, f, g, o): forget gate starts open.
        for (std::size_t k = config_.lstm_hidden; k < 2 * config_.lstm_hidden; ++k) values[k] = 1.0;
      } else {
        for (auto& v : values) v = rng.uniform(-bound, bound);
      }
    } else if (!is_bias) {
      // He-uniform over the fan-in: all axes but the output one.
      const std::size_t fan_in = shape.size() == 4 ? shape[1] * shape[2] * shape[3] : shape[0];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (auto& v : values) v = rng.uniform(-bound, bound);
    }
    params_.push_back({name, ad::Tensor(shape, std::move(values), true)});
  }
}

PoseRegressor::PoseRegressor(ModelConfig config, std::vector<NamedTensor> parameters)
    : config_(std::move(config)), params_(std::move(parameters)) {
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw ConfigError("expected " + std::to_string(layout.size()) + " parameter tensors, got " +
                      std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params_[i].name != layout[i].first || params_[i].tensor.shape() != layout[i].second) {
      throw ConfigError("parameter " + std::to_string(i) + " is " + params_[i].name + " " +
                        ad::to_string(params_[i].tensor.shape()) + ", config expects " + layout[i].first + " " +
                        ad::to_string(layout[i].second));
    }
    params_[i].tensor.set_requires_grad(true);
  }
}

const ad::Tensor& PoseRegressor::parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw ConfigError("no parameter named " + name);
}

std::size_t PoseRegressor::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

ad::Tensor PoseRegressor::backbone_forward(const ad::Tensor& images) const {
  const std::size_t s = config_.input_size;
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != s || images.dim(3) != s) {
    throw ShapeError("backbone expects [N,3," + std::to_string(s) + "," + std::to_string(s) + "], got " +
                     ad::to_string(images.shape()));
  }
  ad::Tensor x = images;
  for (std::size_t i = 0; i < config_.conv_channels.size(); ++i) {
    const auto conv = stage_name("conv", i);
    x = ad::relu(ad::conv2d(x, parameter(conv + ".weight"), parameter(conv + ".bias"), 2, 1));
    if (config_.backbone == Backbone::kResidual) {
      const auto res = stage_name("res", i);
      auto branch = ad::relu(ad::conv2d(x, parameter(res + "a.weight"), parameter(res + "a.bias"), 1, 1));
      branch = ad::conv2d(branch, parameter(res + "b.weight"), parameter(res + "b.bias"), 1, 1);
      x = ad::relu(ad::add(x, branch));
    }
  }
  return x;
}

std::array<ad::LstmParams, 4> PoseRegressor::lstm_params() const {
  if (!config_.use_lstm_reducer) throw ConfigError("model has no LSTM reducer");
  std::array<ad::LstmParams, 4> out;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto name = stage_name("lstm", k);
    out[k] = {parameter(name + ".w_input"), parameter(name + ".w_hidden"), parameter(name + ".bias")};
  }
  return out;
}

ad::Tensor PoseRegressor::lstm_reduce(const ad::Tensor& features) const {
  return uwpose::lstm_reduce(features, lstm_params());
}

PoseOutput PoseRegressor::regress(const ad::Tensor& features) const {
  auto hidden = ad::relu(ad::dense(features, parameter("fc.weight"), parameter("fc.bias")));
  return {ad::dense(hidden, parameter("pos.weight"), parameter("pos.bias")),
          ad::dense(hidden, parameter("rot.weight"), parameter("rot.bias"))};
}

PoseOutput PoseRegressor::forward(const ad::Tensor& images) const {
  auto features = backbone_forward(images);
  return regress(config_.use_lstm_reducer ? lstm_reduce(features) : ad::flatten(features));
}

}  // namespace uwpose
