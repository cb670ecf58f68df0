#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "xmdisc/attention.hpp"
#include "xmdisc/encoders.hpp"

namespace xmdisc {

enum class FusionStrategy { MultiheadAtt, ConcatFuse, Attention, CoAttention };

// Wire names: "multihead", "concat", "attention", "coattention".
std::string_view fusion_name(FusionStrategy strategy);
FusionStrategy parse_fusion(std::string_view name);

// Which modalities feed the fused vector. Absent modalities contribute a
// zero slot; an absent text modality also zeroes the attention query.
struct ModalitySet {
  bool text = true;
  bool image = true;
  bool caption = true;

  static ModalitySet parse(std::string_view list);  // e.g. "text,caption"
  std::string str() const;
  bool empty() const { return !text && !image && !caption; }
  bool full() const { return text && image && caption; }
  bool operator==(const ModalitySet&) const = default;
};

struct FusionOutput {
  Row fused;  // [attended caption; text part; attended image], length 3d
  Row attended_caption;
  Row text_part;
  Row attended_image;
  std::vector<Mat> image_attention;    // per head, 1 x M^2 (empty for concat)
  std::vector<Mat> caption_attention;  // per head, 1 x N (empty for concat)
  FusionStrategy strategy = FusionStrategy::MultiheadAtt;

  bool has_attention() const { return !image_attention.empty(); }
  // Head-averaged image attention, 1 x M^2.
  Mat mean_image_attention() const;
};

class FusionLayer {
 public:
  struct Trace {
    Mat query;
    Mat image_regions;
    Mat caption_states;
    Mat text_states;
    Mat image_summary;  // co-attention query for the text branch
    Mat text_weights;   // co-attention weights over text tokens
    Mat image_weights;  // single-head weights
    Mat caption_weights;
    MultiHeadAttention::Trace image_mha;
    MultiHeadAttention::Trace caption_mha;
  };

  FusionLayer() = default;
  FusionLayer(FusionStrategy strategy, const AttentionConfig& config, Rng& rng);

  FusionOutput forward(const TextFeatures& text, const ImageFeatures& image,
                       const CaptionFeatures& caption, const ModalitySet& modalities,
                       Trace* trace = nullptr) const;

  // Accumulates attention parameter gradients and returns the gradient of
  // the loss w.r.t. the projected image regions (zero-sized when the image
  // modality is absent).
  Mat backward(const Trace& trace, const ModalitySet& modalities, const Row& d_fused);

  NamedParams params();

  FusionStrategy strategy() const { return strategy_; }
  int hidden_size() const { return config_.model_dim; }
  const AttentionConfig& config() const { return config_; }

  MultiHeadAttention image_attention;
  MultiHeadAttention caption_attention;

 private:
  FusionStrategy strategy_ = FusionStrategy::MultiheadAtt;
  AttentionConfig config_;
};

}  // namespace xmdisc
