#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

#include "xmdisc/tensor.hpp"

namespace xmdisc {

// Text and caption sequences are truncated to this many tokens.
inline constexpr int kMaxSequenceTokens = 20;

struct TextFeatures {
  Mat states;  // L x d, one row per kept token
  Row pooled;  // element-wise max over rows of `states`

  int length() const { return static_cast<int>(states.rows()); }
};

struct CaptionFeatures {
  Mat states;  // N x d

  int length() const { return static_cast<int>(states.rows()); }
};

struct ImageFeatures {
  Mat regions;  // M^2 x d, region index = row * M + col
  int grid = 0;
  int raw_channels = 0;
};

// "stub:<seed>" selects the deterministic stub; anything else names a
// pretrained model that must have been registered with a provider.
struct BackendSpec {
  enum class Kind { Pretrained, Stub };

  Kind kind = Kind::Stub;
  std::string identifier;
  std::uint64_t seed = 0;

  static BackendSpec parse(std::string_view text);
  std::string str() const;
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;

  virtual std::vector<std::string> tokenize(std::string_view text) const;
  virtual Mat token_states(const std::vector<std::string>& tokens) const = 0;
  virtual int hidden_size() const = 0;
  virtual std::string identifier() const = 0;
};

// Each token maps to a fixed vector in U(-1, 1)^d drawn from a generator
// seeded by a hash of (token bytes, seed).
class StubTextEncoder final : public TextEncoder {
 public:
  StubTextEncoder(std::uint64_t seed, int hidden_size);

  Mat token_states(const std::vector<std::string>& tokens) const override;
  int hidden_size() const override { return hidden_size_; }
  std::string identifier() const override;

 private:
  std::uint64_t seed_;
  int hidden_size_;
};

// A pretrained encoder (e.g. the lower six layers of a tweet-domain
// transformer) supplied by the host application.
using TextProvider = std::function<Mat(const std::vector<std::string>& tokens)>;

void register_text_backend(const std::string& identifier, int hidden_size, TextProvider provider);
std::shared_ptr<const TextEncoder> make_text_encoder(const BackendSpec& spec, int hidden_size);

TextFeatures encode_text(std::string_view text, const TextEncoder& encoder,
                         int max_tokens = kMaxSequenceTokens);
CaptionFeatures encode_caption(std::string_view caption, const TextEncoder& encoder,
                               int max_tokens = kMaxSequenceTokens);

// Masked max over the first `length` rows; rows beyond it are padding.
Row max_pool(const Mat& states, Eigen::Index length);

class ImageBackbone {
 public:
  virtual ~ImageBackbone() = default;

  // Final feature map reduced to grid x grid cells, flattened row-major to
  // grid^2 x channels().
  virtual Mat feature_map(const cv::Mat& bgr, int grid) const = 0;
  virtual int channels() const = 0;
  virtual std::string identifier() const = 0;
};

// Lifts per-cell pixel statistics through a fixed seeded random map.
class StubImageBackbone final : public ImageBackbone {
 public:
  StubImageBackbone(std::uint64_t seed, int channels);

  Mat feature_map(const cv::Mat& bgr, int grid) const override;
  int channels() const override { return channels_; }
  std::string identifier() const override;

  static constexpr int kStatCount = 7;

 private:
  std::uint64_t seed_;
  int channels_;
  Mat lift_;  // kStatCount x channels
};

using ImageProvider = std::function<Mat(const cv::Mat& bgr, int grid)>;

void register_image_backbone(const std::string& identifier, int channels, ImageProvider provider);
std::shared_ptr<const ImageBackbone> make_image_backbone(const BackendSpec& spec, int channels);

// Per-cell averages over grid x grid adaptive pooling windows of a
// floating-point image; returns grid^2 x channels.
Mat adaptive_average_pool(const cv::Mat& image, int grid);

// Trainable affine map from backbone channels to the text hidden size.
class ImageProjection {
 public:
  ImageProjection() = default;
  ImageProjection(int in_channels, int hidden_size, Rng& rng);

  Mat apply(const Mat& raw) const;
  // Accumulates parameter gradients for d(loss)/d(apply(raw)).
  void backward(const Mat& raw, const Mat& d_regions);

  NamedParams params(const std::string& prefix);

  Param weight;  // in_channels x hidden
  Param bias;    // 1 x hidden
};

// Decodes and runs the backbone. Throws when grid^2 * max(channels, d)
// exceeds `max_elements`.
Mat image_feature_map(const std::filesystem::path& image, const ImageBackbone& backbone, int grid,
                      int hidden_size, std::size_t max_elements);

ImageFeatures encode_image(const std::filesystem::path& image, const ImageBackbone& backbone,
                           const ImageProjection& projection, int grid, std::size_t max_elements);

class CaptionSource {
 public:
  virtual ~CaptionSource() = default;
  virtual std::string caption(const std::string& post_id, const std::filesystem::path& image) const = 0;
};

class PrecomputedCaptions final : public CaptionSource {
 public:
  explicit PrecomputedCaptions(std::map<std::string, std::string> captions)
      : captions_(std::move(captions)) {}

  static PrecomputedCaptions load(const std::filesystem::path& path);

  std::string caption(const std::string& post_id, const std::filesystem::path& image) const override;
  std::size_t size() const { return captions_.size(); }

 private:
  std::map<std::string, std::string> captions_;
};

// Describes overall brightness and dominant colour. Stands in for a
// COCO-trained captioner in tests and desk runs.
class StubCaptioner final : public CaptionSource {
 public:
  std::string caption(const std::string& post_id, const std::filesystem::path& image) const override;
};

using CaptionProvider = std::function<std::string(const std::string& post_id, const std::string& image_path)>;

void register_captioner(const std::string& identifier, CaptionProvider provider);
std::shared_ptr<const CaptionSource> make_captioner(const BackendSpec& spec);

// Drops every registered provider. Hosts whose providers hold interpreter
// objects call this before shutting the interpreter down.
void clear_backend_registries();

std::string caption_image(const std::string& post_id, const std::filesystem::path& image,
                          const CaptionSource& source);

void write_captions(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& captions);

}  // namespace xmdisc
