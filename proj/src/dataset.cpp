#include "uwpose/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uwpose/errors.hpp"
#include "uwpose/rng.hpp"

namespace uwpose {

namespace fs = std::filesystem;

const char* to_string(CameraId id) { return id == CameraId::kLeft ? "left" : "right"; }

CameraId camera_from_string(const std::string& s) {
  if (s == "left") return CameraId::kLeft;
  if (s == "right") return CameraId::kRight;
  throw FormatError("unknown camera id '" + s + "' (expected left or right)");
}

namespace {

constexpr const char* kManifestHeader = "image_path,x,y,z,qw,qx,qy,qz,camera_id";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cols;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cols.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cols.push_back(cur);
  return cols;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<SampleRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  const std::string source = path.string();

  std::vector<SampleRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line != kManifestHeader) throw ParseError(source, line_no, "expected header '" + std::string(kManifestHeader) + "'");
      continue;
    }
    auto cols = split_csv(line);
    if (cols.size() != 9) {
      throw ParseError(source, line_no, "expected 9 columns, got " + std::to_string(cols.size()));
    }
    for (auto& c : cols) c = trim(c);
    std::array<double, 7> v{};
    for (std::size_t i = 0; i < 7; ++i) {
      auto parsed = parse_double(cols[i + 1]);
      if (!parsed) throw ParseError(source, line_no, "column " + std::to_string(i + 2) + " is not a finite number: '" + cols[i + 1] + "'");
      v[i] = *parsed;
    }
    SampleRecord rec;
    if (cols[0].empty()) throw ParseError(source, line_no, "empty image path");
    fs::path image(cols[0]);
    rec.image_path = image.is_absolute() ? image : base / image;
    rec.pose.position = {v[0], v[1], v[2]};
    try {
      rec.pose.orientation = canonicalize(normalize(Quaternion{v[3], v[4], v[5], v[6]}));
      rec.camera = camera_from_string(cols[8]);
    } catch (const Error& e) {
      throw ParseError(source, line_no, e.what());
    }
    records.push_back(std::move(rec));
  }
  if (!header_seen) throw ParseError(source, 1, "empty manifest (missing header)");
  return records;
}

void write_manifest(const fs::path& path, const std::vector<SampleRecord>& records) {
  const fs::path base = fs::absolute(path).parent_path();
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (const auto& r : records) {
    fs::path image = r.image_path;
    const fs::path abs = fs::absolute(image).lexically_normal();
    const fs::path rel = abs.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") image = rel;
    const auto& p = r.pose.position;
    const auto& q = r.pose.orientation;
    out << image.generic_string() << ',' << format_double(p[0]) << ',' << format_double(p[1]) << ','
        << format_double(p[2]) << ',' << format_double(q.w) << ',' << format_double(q.x) << ','
        << format_double(q.y) << ',' << format_double(q.z) << ',' << to_string(r.camera) << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write manifest " + path.string());
  file << out.str();
  if (!file) throw IoError("short write to " + path.string());
}

void NormalizationState::validate() const {
  for (std::size_t c = 0; c < 3; ++c) {
    if (!(channel_std[c] > 0.0)) throw ConfigError("channel_std must be positive");
    if (!(pos_max[c] >= pos_min[c])) throw ConfigError("pos_max must not be below pos_min");
  }
}

std::vector<double> resize_bilinear(const RgbImage& image, std::size_t out_w, std::size_t out_h) {
  if (image.width == 0 || image.height == 0 || image.pixels.size() != image.width * image.height * 3) {
    throw FormatError("resize_bilinear: expected a non-empty 3-channel image");
  }
  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      t[o] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto xs = taps(image.width, out_w);
  const auto ys = taps(image.height, out_h);
  std::vector<double> out(3 * out_w * out_h);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const auto& ty = ys[y];
      for (std::size_t x = 0; x < out_w; ++x) {
        const auto& tx = xs[x];
        const double top = (1.0 - tx.frac) * image.at(ty.i0, tx.i0, c) + tx.frac * image.at(ty.i0, tx.i1, c);
        const double bottom = (1.0 - tx.frac) * image.at(ty.i1, tx.i0, c) + tx.frac * image.at(ty.i1, tx.i1, c);
        out[(c * out_h + y) * out_w + x] = ((1.0 - ty.frac) * top + ty.frac * bottom) / 255.0;
      }
    }
  }
  return out;
}

std::vector<double> resize_and_crop(const RgbImage& image, const PreprocessConfig& cfg) {
  if (cfg.crop == 0 || cfg.crop > cfg.resize) throw ConfigError("crop size must be in [1, resize]");
  const auto resized = resize_bilinear(image, cfg.resize, cfg.resize);
  const std::size_t off = cfg.crop_offset();
  std::vector<double> out(3 * cfg.crop * cfg.crop);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < cfg.crop; ++y) {
      const double* src = resized.data() + (c * cfg.resize + y + off) * cfg.resize + off;
      std::copy_n(src, cfg.crop, out.begin() + static_cast<std::ptrdiff_t>((c * cfg.crop + y) * cfg.crop));
    }
  }
  return out;
}

ad::Tensor preprocess_image(const RgbImage& image, const NormalizationState& state, const PreprocessConfig& cfg) {
  auto values = resize_and_crop(image, cfg);
  const std::size_t plane = cfg.crop * cfg.crop;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      auto& v = values[c * plane + i];
      v = (v - state.channel_mean[c]) / state.channel_std[c];
    }
  }
  return ad::Tensor({3, cfg.crop, cfg.crop}, std::move(values));
}

NormalizationState compute_pose_extent(const std::vector<SampleRecord>& train, NormalizationState base) {
  if (train.empty()) throw ConfigError("cannot compute normalization from an empty training set");
  base.pos_min = train.front().pose.position;
  base.pos_max = train.front().pose.position;
  for (const auto& r : train) {
    for (std::size_t a = 0; a < 3; ++a) {
      base.pos_min[a] = std::min(base.pos_min[a], r.pose.position[a]);
      base.pos_max[a] = std::max(base.pos_max[a], r.pose.position[a]);
    }
  }
  return base;
}

NormalizationState compute_normalization(const std::vector<SampleRecord>& train, const PreprocessConfig& cfg) {
  NormalizationState state = compute_pose_extent(train);
  std::array<double, 3> sum{}, sum_sq{};
  double count = 0.0;
  for (const auto& r : train) {
    const auto values = resize_and_crop(read_image(r.image_path), cfg);
    const std::size_t plane = cfg.crop * cfg.crop;
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = values[c * plane + i];
        sum[c] += v;
        sum_sq[c] += v * v;
      }
    }
    count += static_cast<double>(plane);
  }
  for (std::size_t c = 0; c < 3; ++c) {
    const double m = sum[c] / count;
    const double var = std::max(0.0, sum_sq[c] / count - m * m);
    state.channel_mean[c] = m;
    // Constant channels keep unit scale.
    state.channel_std[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return state;
}

NormalizedPose normalize_pose(const Pose& pose, const NormalizationState& state) {
  NormalizedPose out;
  for (std::size_t a = 0; a < 3; ++a) {
    if (state.degenerate(a)) {
      out.values[a] = 0.0;
      out.clamped = out.clamped || pose.position[a] != state.pos_min[a];
      continue;
    }
    double v = 2.0 * (pose.position[a] - state.pos_min[a]) / (state.pos_max[a] - state.pos_min[a]) - 1.0;
    if (v < -1.0 || v > 1.0) {
      v = std::clamp(v, -1.0, 1.0);
      out.clamped = true;
    }
    out.values[a] = v;
  }
  const auto& q = pose.orientation;
  out.values[3] = q.w;
  out.values[4] = q.x;
  out.values[5] = q.y;
  out.values[6] = q.z;
  return out;
}

Pose denormalize_pose(const std::array<double, 7>& values, const NormalizationState& state) {
  Pose pose;
  for (std::size_t a = 0; a < 3; ++a) {
    if (state.degenerate(a)) {
      pose.position[a] = state.pos_min[a];
    } else {
      pose.position[a] = state.pos_min[a] + (values[a] + 1.0) * 0.5 * (state.pos_max[a] - state.pos_min[a]);
    }
  }
  pose.orientation = {values[3], values[4], values[5], values[6]};
  return pose;
}

PreparedSet prepare(const std::vector<SampleRecord>& records, const NormalizationState& state,
                    const PreprocessConfig& cfg) {
  state.validate();
  PreparedSet set;
  set.preprocess = cfg;
  set.images.reserve(records.size());
  for (const auto& r : records) {
    auto t = preprocess_image(read_image(r.image_path), state, cfg);
    set.images.emplace_back(t.data().begin(), t.data().end());
    auto norm = normalize_pose(r.pose, state);
    if (norm.clamped) ++set.clamped;
    set.targets.push_back(norm.values);
    set.poses.push_back(r.pose);
  }
  return set;
}

ad::Tensor batch_images(const PreparedSet& set, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ConfigError("empty batch");
  const std::size_t s = set.preprocess.crop;
  const std::size_t per = 3 * s * s;
  ad::Buffer data(indices.size() * per);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& img = set.images.at(indices[b]);
    std::copy(img.begin(), img.end(), data.begin() + static_cast<std::ptrdiff_t>(b * per));
  }
  return ad::Tensor::from_buffer({indices.size(), 3, s, s}, std::move(data));
}

std::optional<fs::path> sibling_right_image(const SampleRecord& left) {
  std::string name = left.image_path.filename().string();
  const auto pos = name.rfind("_l.");
  if (pos == std::string::npos) return std::nullopt;
  name.replace(pos, 3, "_r.");
  fs::path candidate = left.image_path.parent_path() / name;
  std::error_code ec;
  if (!fs::is_regular_file(candidate, ec)) return std::nullopt;
  return candidate;
}

AugmentResult augment_stereo(const std::vector<SampleRecord>& records, const RigidTransform& left_to_right,
                             const RightImageResolver& resolver) {
  AugmentResult result;
  result.records = records;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.camera != CameraId::kLeft) continue;
    auto right_path = resolver(rec);
    if (!right_path) {
      result.failures.push_back("record " + std::to_string(i) + " (" + rec.image_path.string() +
                                "): no right-camera image");
      continue;
    }
    SampleRecord right;
    right.image_path = *right_path;
    right.pose = right_camera_pose(rec.pose, left_to_right);
    right.camera = CameraId::kRight;
    result.records.push_back(std::move(right));
  }
  return result;
}

std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split(const std::vector<SampleRecord>& records,
                                                                      double train_fraction, std::uint64_t seed) {
  if (records.empty()) throw ConfigError("cannot split an empty record list");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(records.size())));
  // Both sides stay non-empty whenever that is possible.
  if (records.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, records.size() - 1);
  std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(records[order[i]]);
  }
  return out;
}

}  // namespace uwpose
