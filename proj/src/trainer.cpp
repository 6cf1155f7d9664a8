#include "uwpose/trainer.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "uwpose/errors.hpp"
#include "uwpose/ops.hpp"
#include "uwpose/rng.hpp"
#include "uwpose/serialize.hpp"

namespace uwpose {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd_momentum"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::kSgdMomentum;
  throw ConfigError("unknown optimizer '" + s + "' (adam or sgd_momentum)");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be finite and >= 0");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
}

void Adam::step(std::vector<NamedTensor>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.tensor.size(), 0.0);
      v_.emplace_back(p.tensor.size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& tensor = params[k].tensor;
    if (!tensor.has_grad()) continue;
    const auto& g = tensor.impl()->grad;
    auto data = tensor.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      data[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void SgdMomentum::step(std::vector<NamedTensor>& params) {
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.tensor.size(), 0.0);
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& tensor = params[k].tensor;
    if (!tensor.has_grad()) continue;
    const auto& g = tensor.impl()->grad;
    auto data = tensor.mutable_data();
    auto& vel = velocity_[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      vel[i] = momentum_ * vel[i] + g[i];
      data[i] -= lr_ * vel[i];
    }
  }
}

PoseRegressor Checkpoint::model() const { return PoseRegressor(model_config, parameters); }

namespace {

constexpr char kMagic[8] = {'U', 'W', 'P', 'O', 'S', 'E', 'C', 'K'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  json header;
  header["format_version"] = Checkpoint::kFormatVersion;
  header["model_config"] = ckpt.model_config;
  header["train_config"] = ckpt.train_config;
  header["preprocess"] = ckpt.preprocess;
  header["normalization"] = ckpt.normalization;
  header["epoch"] = ckpt.epoch;
  header["last_loss"] = std::isfinite(ckpt.last_loss) ? json(ckpt.last_loss) : json(nullptr);
  std::string payload;
  auto tensors = json::array();
  for (const auto& p : ckpt.parameters) {
    tensors.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", payload.size()}, {"count", p.tensor.size()}});
    for (double v : p.tensor.data()) put_u64(payload, std::bit_cast<std::uint64_t>(v));
  }
  header["tensors"] = std::move(tensors);
  header["payload_bytes"] = payload.size();
  const std::string text = header.dump();

  std::string blob(kMagic, sizeof kMagic);
  put_u64(blob, text.size());
  blob += text;
  blob += payload;

  // Write-then-rename so a failed run never leaves a partial checkpoint.
  const fs::path tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  const std::string where = path.string() + ": ";
  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(where + "not a checkpoint (bad magic or truncated preamble)");
  }
  const std::uint64_t header_len = get_u64(bytes + 8);
  if (header_len > blob.size() - 16) throw FormatError(where + "truncated header");
  json header;
  try {
    header = json::parse(blob.begin() + 16, blob.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw FormatError(where + "corrupt header: " + e.what());
  }
  try {
    const int version = header.at("format_version").get<int>();
    if (version != Checkpoint::kFormatVersion) {
      throw FormatError(where + "unsupported format version " + std::to_string(version) + " (expected " +
                        std::to_string(Checkpoint::kFormatVersion) + ")");
    }
    const std::size_t payload_start = 16 + header_len;
    const std::size_t payload_bytes = header.at("payload_bytes").get<std::size_t>();
    if (blob.size() - payload_start != payload_bytes) {
      throw FormatError(where + "payload is " + std::to_string(blob.size() - payload_start) + " bytes, header declares " +
                        std::to_string(payload_bytes) + " (truncated?)");
    }
    Checkpoint ckpt;
    ckpt.model_config = header.at("model_config").get<ModelConfig>();
    ckpt.train_config = header.at("train_config").get<TrainConfig>();
    ckpt.preprocess = header.at("preprocess").get<PreprocessConfig>();
    ckpt.normalization = header.at("normalization").get<NormalizationState>();
    ckpt.epoch = header.at("epoch").get<std::size_t>();
    const auto& loss = header.at("last_loss");
    ckpt.last_loss = loss.is_null() ? std::numeric_limits<double>::quiet_NaN() : loss.get<double>();
    for (const auto& t : header.at("tensors")) {
      const auto shape = t.at("shape").get<ad::Shape>();
      const auto offset = t.at("offset").get<std::size_t>();
      const auto count = t.at("count").get<std::size_t>();
      if (count != ad::numel(shape) || offset + count * 8 > payload_bytes) {
        throw FormatError(where + "tensor " + t.at("name").get<std::string>() + " exceeds the payload");
      }
      std::vector<double> values(count);
      for (std::size_t i = 0; i < count; ++i) {
        values[i] = std::bit_cast<double>(get_u64(bytes + payload_start + offset + 8 * i));
      }
      ckpt.parameters.push_back({t.at("name").get<std::string>(), ad::Tensor(shape, std::move(values), true)});
    }
    // Validates parameter names/shapes against the config.
    (void)PoseRegressor(ckpt.model_config, ckpt.parameters);
    return ckpt;
  } catch (const json::exception& e) {
    throw FormatError(where + "malformed header: " + e.what());
  }
}

TrainResult train(const ModelConfig& model_config, const PreparedSet& train_set, const PreparedSet& eval,
                  const NormalizationState& normalization, const TrainConfig& config, const EpochCallback& on_epoch) {
  return train(PoseRegressor(model_config), train_set, eval, normalization, config, on_epoch);
}

TrainResult train(PoseRegressor model, const PreparedSet& train_set, const PreparedSet& eval,
                  const NormalizationState& normalization, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.size() == 0) throw ConfigError("training set is empty");
  if (train_set.preprocess.crop != model.config().input_size) {
    throw ConfigError("model input_size " + std::to_string(model.config().input_size) + " does not match crop size " +
                      std::to_string(train_set.preprocess.crop));
  }
  const LossConfig loss_cfg{config.beta};
  std::unique_ptr<Optimizer> optimizer;
  if (config.optimizer == OptimizerKind::kAdam) {
    optimizer = std::make_unique<Adam>(config.learning_rate);
  } else {
    optimizer = std::make_unique<SgdMomentum>(config.learning_rate);
  }

  TrainResult result;
  auto make_checkpoint = [&](std::size_t epoch, double last_loss) {
    Checkpoint c;
    c.model_config = model.config();
    for (const auto& p : model.parameters()) c.parameters.push_back({p.name, p.tensor.detach()});
    c.normalization = normalization;
    c.preprocess = train_set.preprocess;
    c.train_config = config;
    c.epoch = epoch;
    c.last_loss = last_loss;
    return c;
  };

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  double last_loss = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(config.seed, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double weighted = 0.0;
    std::size_t step = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++step) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + config.batch_size)));
      std::vector<std::array<double, 7>> rows;
      for (auto i : idx) rows.push_back(train_set.targets[i]);
      for (auto& p : model.parameters()) p.tensor.zero_grad();
      double value = 0.0;
      {
        ad::Tape tape;
        try {
          const auto out = model.forward(batch_images(train_set, idx));
          const auto loss = composite_loss(out, PoseTargets::from_rows(rows), loss_cfg);
          value = loss.item();
          if (!std::isfinite(value)) throw DivergenceError("non-finite loss");
          tape.backward(loss);
        } catch (const DivergenceError& e) {
          throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
        }
      }
      optimizer->step(model.parameters());
      weighted += value * static_cast<double>(idx.size());
      last_loss = value;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = weighted / static_cast<double>(n);
    stats.mean_pos_err_m = stats.mean_ori_err_deg = std::numeric_limits<double>::quiet_NaN();
    if (eval.size() > 0) {
      const auto report = evaluate(model, eval, normalization);
      stats.mean_pos_err_m = report.mean_position_m;
      stats.mean_ori_err_deg = report.mean_orientation_deg;
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 && !config.checkpoint_path.empty()) {
      save_checkpoint(config.checkpoint_path, make_checkpoint(epoch, last_loss));
    }
  }
  result.checkpoint = make_checkpoint(config.epochs, last_loss);
  return result;
}

std::string history_to_csv(const std::vector<EpochStats>& history) {
  std::ostringstream out;
  out << "epoch,mean_loss,mean_pos_err_m,mean_ori_err_deg\n";
  for (const auto& s : history) {
    out << s.epoch << ',' << format_number(s.mean_loss) << ',' << format_number(s.mean_pos_err_m) << ','
        << format_number(s.mean_ori_err_deg) << '\n';
  }
  return out.str();
}

}  // namespace uwpose
