#include "xmdisc/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>

#include "xmdisc/errors.hpp"
#include "xmdisc/image_io.hpp"

namespace xmdisc {
namespace {

template <typename Provider>
struct Registered {
  int dim = 0;
  Provider provider;
};

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, Registered<TextProvider>>& text_registry() {
  static std::map<std::string, Registered<TextProvider>> r;
  return r;
}

std::map<std::string, Registered<ImageProvider>>& image_registry() {
  static std::map<std::string, Registered<ImageProvider>> r;
  return r;
}

std::map<std::string, CaptionProvider>& caption_registry() {
  static std::map<std::string, CaptionProvider> r;
  return r;
}

class ExternalTextEncoder final : public TextEncoder {
 public:
  ExternalTextEncoder(std::string id, int dim, TextProvider provider)
      : id_(std::move(id)), dim_(dim), provider_(std::move(provider)) {}

  Mat token_states(const std::vector<std::string>& tokens) const override {
    Mat states = provider_(tokens);
    if (states.rows() != static_cast<Eigen::Index>(tokens.size()) || states.cols() != dim_) {
      throw ShapeError("text backend '" + id_ + "' returned " + shape_str(states) + ", expected " +
                       std::to_string(tokens.size()) + "x" + std::to_string(dim_));
    }
    return states;
  }
  int hidden_size() const override { return dim_; }
  std::string identifier() const override { return id_; }

 private:
  std::string id_;
  int dim_;
  TextProvider provider_;
};

class ExternalImageBackbone final : public ImageBackbone {
 public:
  ExternalImageBackbone(std::string id, int channels, ImageProvider provider)
      : id_(std::move(id)), channels_(channels), provider_(std::move(provider)) {}

  Mat feature_map(const cv::Mat& bgr, int grid) const override {
    Mat map = provider_(bgr, grid);
    if (map.rows() != static_cast<Eigen::Index>(grid) * grid || map.cols() != channels_) {
      throw ShapeError("image backbone '" + id_ + "' returned " + shape_str(map) + ", expected " +
                       std::to_string(grid * grid) + "x" + std::to_string(channels_));
    }
    return map;
  }
  int channels() const override { return channels_; }
  std::string identifier() const override { return id_; }

 private:
  std::string id_;
  int channels_;
  ImageProvider provider_;
};

class ExternalCaptioner final : public CaptionSource {
 public:
  ExternalCaptioner(std::string id, CaptionProvider provider)
      : id_(std::move(id)), provider_(std::move(provider)) {}

  std::string caption(const std::string& post_id, const std::filesystem::path& image) const override {
    return provider_(post_id, image.string());
  }

 private:
  std::string id_;
  CaptionProvider provider_;
};

std::string unavailable(const std::string& what, const std::string& id) {
  return what + " '" + id + "' is unavailable: no pretrained weights or provider registered";
}

}  // namespace

BackendSpec BackendSpec::parse(std::string_view text) {
  BackendSpec spec;
  constexpr std::string_view prefix = "stub:";
  if (text.substr(0, prefix.size()) == prefix) {
    const auto digits = text.substr(prefix.size());
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), spec.seed);
    if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size()) {
      throw ConfigError("invalid stub backend '" + std::string(text) + "', expected stub:<seed>");
    }
    spec.kind = Kind::Stub;
    spec.identifier = std::string(text);
    return spec;
  }
  if (text.empty()) throw ConfigError("empty backend identifier");
  spec.kind = Kind::Pretrained;
  spec.identifier = std::string(text);
  return spec;
}

std::string BackendSpec::str() const {
  return kind == Kind::Stub ? "stub:" + std::to_string(seed) : identifier;
}

std::vector<std::string> TextEncoder::tokenize(std::string_view text) const {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current += ch;
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

StubTextEncoder::StubTextEncoder(std::uint64_t seed, int hidden_size)
    : seed_(seed), hidden_size_(hidden_size) {
  if (hidden_size <= 0) throw ConfigError("hidden size must be positive");
}

Mat StubTextEncoder::token_states(const std::vector<std::string>& tokens) const {
  Mat states(static_cast<Eigen::Index>(tokens.size()), hidden_size_);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Rng rng(fnv1a64(tokens[i], seed_));
    for (int k = 0; k < hidden_size_; ++k) states(static_cast<Eigen::Index>(i), k) = rng.uniform(-1.0, 1.0);
  }
  return states;
}

std::string StubTextEncoder::identifier() const { return "stub:" + std::to_string(seed_); }

void register_text_backend(const std::string& identifier, int hidden_size, TextProvider provider) {
  std::lock_guard lock(registry_mutex());
  text_registry()[identifier] = {hidden_size, std::move(provider)};
}

std::shared_ptr<const TextEncoder> make_text_encoder(const BackendSpec& spec, int hidden_size) {
  if (spec.kind == BackendSpec::Kind::Stub) {
    return std::make_shared<StubTextEncoder>(spec.seed, hidden_size);
  }
  std::lock_guard lock(registry_mutex());
  auto it = text_registry().find(spec.identifier);
  if (it == text_registry().end()) throw BackendUnavailable(unavailable("text backend", spec.identifier));
  if (it->second.dim != hidden_size) {
    throw ConfigError("text backend '" + spec.identifier + "' has hidden size " +
                      std::to_string(it->second.dim) + ", configured " + std::to_string(hidden_size));
  }
  return std::make_shared<ExternalTextEncoder>(spec.identifier, it->second.dim, it->second.provider);
}

Row max_pool(const Mat& states, Eigen::Index length) {
  Row pooled = Row::Constant(states.cols(), -std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < length; ++i) pooled = pooled.cwiseMax(states.row(i));
  return pooled;
}

namespace {

Mat encode_sequence(std::string_view text, const TextEncoder& encoder, int max_tokens,
                    const char* what) {
  if (max_tokens < 1) throw ConfigError("token cap must be at least 1");
  auto tokens = encoder.tokenize(text);
  if (tokens.empty()) throw DataError(std::string("cannot encode empty ") + what);
  if (tokens.size() > static_cast<std::size_t>(max_tokens)) tokens.resize(max_tokens);
  return encoder.token_states(tokens);
}

}  // namespace

TextFeatures encode_text(std::string_view text, const TextEncoder& encoder, int max_tokens) {
  TextFeatures features;
  features.states = encode_sequence(text, encoder, max_tokens, "text");
  features.pooled = max_pool(features.states, features.states.rows());
  return features;
}

CaptionFeatures encode_caption(std::string_view caption, const TextEncoder& encoder, int max_tokens) {
  return {encode_sequence(caption, encoder, max_tokens, "caption")};
}

Mat adaptive_average_pool(const cv::Mat& image, int grid) {
  if (grid < 1) throw ConfigError("grid size must be at least 1");
  const int h = image.rows;
  const int w = image.cols;
  Mat out(static_cast<Eigen::Index>(grid) * grid, image.channels());
  for (int i = 0; i < grid; ++i) {
    const int y0 = (i * h) / grid;
    const int y1 = ((i + 1) * h + grid - 1) / grid;
    for (int j = 0; j < grid; ++j) {
      const int x0 = (j * w) / grid;
      const int x1 = ((j + 1) * w + grid - 1) / grid;
      const cv::Scalar mean = cv::mean(image(cv::Rect(x0, y0, x1 - x0, y1 - y0)));
      for (int c = 0; c < image.channels(); ++c) out(i * grid + j, c) = mean[c];
    }
  }
  return out;
}

StubImageBackbone::StubImageBackbone(std::uint64_t seed, int channels)
    : seed_(seed), channels_(channels), lift_(kStatCount, channels) {
  if (channels <= 0) throw ConfigError("backbone channels must be positive");
  Rng rng(splitmix64(seed ^ 0x1f2e3d4c5b6a7988ULL));
  fill_uniform(lift_, 1.5, rng);
}

Mat StubImageBackbone::feature_map(const cv::Mat& bgr, int grid) const {
  if (grid < 1) throw ConfigError("grid size must be at least 1");
  cv::Mat image;
  bgr.convertTo(image, CV_64FC3, 1.0 / 255.0);
  cv::Mat squared = image.mul(image);
  const Mat mean = adaptive_average_pool(image, grid);
  const Mat mean_sq = adaptive_average_pool(squared, grid);

  Mat stats(mean.rows(), kStatCount);
  for (Eigen::Index r = 0; r < mean.rows(); ++r) {
    for (int c = 0; c < 3; ++c) {
      stats(r, c) = mean(r, c);
      stats(r, 3 + c) = std::sqrt(std::max(0.0, mean_sq(r, c) - mean(r, c) * mean(r, c)));
    }
    stats(r, 6) = 1.0;
  }
  return (stats * lift_).array().tanh().matrix();
}

std::string StubImageBackbone::identifier() const { return "stub:" + std::to_string(seed_); }

void register_image_backbone(const std::string& identifier, int channels, ImageProvider provider) {
  std::lock_guard lock(registry_mutex());
  image_registry()[identifier] = {channels, std::move(provider)};
}

std::shared_ptr<const ImageBackbone> make_image_backbone(const BackendSpec& spec, int channels) {
  if (spec.kind == BackendSpec::Kind::Stub) {
    return std::make_shared<StubImageBackbone>(spec.seed, channels);
  }
  std::lock_guard lock(registry_mutex());
  auto it = image_registry().find(spec.identifier);
  if (it == image_registry().end()) throw BackendUnavailable(unavailable("image backbone", spec.identifier));
  if (it->second.dim != channels) {
    throw ConfigError("image backbone '" + spec.identifier + "' has " + std::to_string(it->second.dim) +
                      " channels, configured " + std::to_string(channels));
  }
  return std::make_shared<ExternalImageBackbone>(spec.identifier, it->second.dim, it->second.provider);
}

ImageProjection::ImageProjection(int in_channels, int hidden_size, Rng& rng)
    : weight(in_channels, hidden_size), bias(1, hidden_size) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(in_channels));
  fill_uniform(weight.value, limit, rng);
  fill_uniform(bias.value, limit, rng);
}

Mat ImageProjection::apply(const Mat& raw) const {
  if (raw.cols() != weight.value.rows()) {
    throw ShapeError("image projection expects " + std::to_string(weight.value.rows()) +
                     " channels, got " + shape_str(raw));
  }
  Mat out = raw * weight.value;
  out.rowwise() += bias.value.row(0);
  return out;
}

void ImageProjection::backward(const Mat& raw, const Mat& d_regions) {
  weight.grad.noalias() += raw.transpose() * d_regions;
  bias.grad += d_regions.colwise().sum();
}

NamedParams ImageProjection::params(const std::string& prefix) {
  return {{prefix + "weight", &weight}, {prefix + "bias", &bias}};
}

Mat image_feature_map(const std::filesystem::path& image, const ImageBackbone& backbone, int grid,
                      int hidden_size, std::size_t max_elements) {
  if (grid < 1) throw ConfigError("grid size must be at least 1");
  const std::size_t cells = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
  const std::size_t width = static_cast<std::size_t>(std::max(backbone.channels(), hidden_size));
  if (cells * width > max_elements) {
    throw ConfigError("image features of " + std::to_string(cells) + "x" + std::to_string(width) +
                      " exceed the memory cap of " + std::to_string(max_elements) + " elements");
  }
  return backbone.feature_map(decode_image(image), grid);
}

ImageFeatures encode_image(const std::filesystem::path& image, const ImageBackbone& backbone,
                           const ImageProjection& projection, int grid, std::size_t max_elements) {
  const int hidden = static_cast<int>(projection.weight.value.cols());
  ImageFeatures features;
  features.regions = projection.apply(image_feature_map(image, backbone, grid, hidden, max_elements));
  features.grid = grid;
  features.raw_channels = backbone.channels();
  return features;
}

PrecomputedCaptions PrecomputedCaptions::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open caption file: " + path.string());
  std::map<std::string, std::string> captions;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    try {
      const auto record = nlohmann::json::parse(line);
      captions[record.at("id").get<std::string>()] = record.at("caption").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed caption record at line " + std::to_string(n) + ": " + e.what());
    }
  }
  return PrecomputedCaptions(std::move(captions));
}

std::string PrecomputedCaptions::caption(const std::string& post_id, const std::filesystem::path&) const {
  auto it = captions_.find(post_id);
  if (it == captions_.end()) throw DataError("no precomputed caption for post '" + post_id + "'");
  return it->second;
}

std::string StubCaptioner::caption(const std::string&, const std::filesystem::path& image) const {
  const cv::Mat bgr = decode_image(image);
  const cv::Scalar mean = cv::mean(bgr);
  const double b = mean[0], g = mean[1], r = mean[2];
  const double brightness = (b + g + r) / 3.0;

  struct Named { const char* name; double r, g, b; };
  static constexpr Named kPalette[] = {
      {"red", 200, 40, 40},      {"green", 40, 160, 60},   {"blue", 40, 70, 200},
      {"yellow", 220, 210, 60},  {"orange", 230, 140, 40}, {"purple", 130, 60, 160},
      {"brown", 120, 80, 50},    {"white", 240, 240, 240}, {"black", 15, 15, 15},
      {"gray", 128, 128, 128}};
  const Named* best = &kPalette[0];
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& c : kPalette) {
    const double d = (c.r - r) * (c.r - r) + (c.g - g) * (c.g - g) + (c.b - b) * (c.b - b);
    if (d < best_dist) best_dist = d, best = &c;
  }
  const char* tone = brightness < 85 ? "dark" : brightness > 170 ? "bright" : "muted";
  return std::string("a ") + tone + " picture with mostly " + best->name + " tones";
}

void register_captioner(const std::string& identifier, CaptionProvider provider) {
  std::lock_guard lock(registry_mutex());
  caption_registry()[identifier] = std::move(provider);
}

std::shared_ptr<const CaptionSource> make_captioner(const BackendSpec& spec) {
  if (spec.kind == BackendSpec::Kind::Stub) return std::make_shared<StubCaptioner>();
  std::lock_guard lock(registry_mutex());
  auto it = caption_registry().find(spec.identifier);
  if (it == caption_registry().end()) throw BackendUnavailable(unavailable("captioner", spec.identifier));
  return std::make_shared<ExternalCaptioner>(spec.identifier, it->second);
}

void clear_backend_registries() {
  text_registry().clear();
  image_registry().clear();
  caption_registry().clear();
}

std::string caption_image(const std::string& post_id, const std::filesystem::path& image,
                          const CaptionSource& source) {
  std::string caption = source.caption(post_id, image);
  if (std::all_of(caption.begin(), caption.end(), [](unsigned char c) { return std::isspace(c); })) {
    throw DataError("captioner returned an empty caption for post '" + post_id + "'");
  }
  return caption;
}

void write_captions(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& captions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write caption file: " + path.string());
  for (const auto& [id, caption] : captions) {
    nlohmann::ordered_json record;
    record["id"] = id;
    record["caption"] = caption;
    out << record.dump() << '\n';
  }
}

}  // namespace xmdisc
