#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xmdisc/corpus.hpp"
#include "xmdisc/fusion.hpp"
#include "xmdisc/labels.hpp"

namespace xmdisc {

using ClassWeights = std::array<double, kNumLabels>;
using LabelCounts = std::array<std::size_t, kNumLabels>;

// One tanh hidden layer followed by a 5-way affine output layer.
class ClassifierHead {
 public:
  struct Trace {
    Row input;
    Row hidden;
  };

  ClassifierHead() = default;
  ClassifierHead(int input_dim, int hidden_dim, Rng& rng);

  Row logits(const Row& fused, Trace* trace = nullptr) const;
  // Accumulates parameter gradients, returns d(loss)/d(fused).
  Row backward(const Trace& trace, const Row& d_logits);

  NamedParams params(const std::string& prefix);
  int input_dim() const { return static_cast<int>(w_hidden.value.rows()); }

  Param w_hidden;  // input x hidden
  Param b_hidden;  // 1 x hidden
  Param w_out;     // hidden x 5
  Param b_out;     // 1 x 5
};

Row softmax(const Row& logits);

// Probability vector over the five labels for a fused representation.
Row predict(const FusionOutput& fused, const ClassifierHead& head);

DiscourseLabel argmax_label(const Row& probs);

// w_c = N / (K * N_c): inverse frequency normalised so that balanced counts
// give all-ones weights.
ClassWeights class_weights(const LabelCounts& counts);

LabelCounts count_labels(const std::vector<DiscourseLabel>& labels);

// sum_i w_{y_i} * -log p_i[y_i] / sum_i w_{y_i}, probabilities clamped at 1e-12.
double weighted_cross_entropy(const std::vector<Row>& probs, const std::vector<DiscourseLabel>& labels,
                              const ClassWeights& weights);

// Same loss computed from logits via log-softmax. When `d_logits` is given
// it receives the gradient w.r.t. each logit row.
double weighted_cross_entropy_logits(const std::vector<Row>& logits,
                                     const std::vector<DiscourseLabel>& labels,
                                     const ClassWeights& weights, std::vector<Row>* d_logits = nullptr);

struct ModelConfig {
  int hidden_size = 768;
  int heads = 6;
  int grid = 14;
  int raw_channels = 2048;
  int text_cap = kMaxSequenceTokens;
  int caption_cap = kMaxSequenceTokens;
  FusionStrategy fusion = FusionStrategy::MultiheadAtt;
  ModalitySet modalities;
  std::uint64_t seed = 0;

  AttentionConfig attention() const { return {heads, hidden_size}; }
  void validate() const;
};

// Per-post inputs after the frozen encoders: text states, the raw backbone
// feature map (projected inside the model) and caption states.
struct EncodedPost {
  std::string id;
  TextFeatures text;
  Mat image_raw;  // M^2 x raw_channels, empty if the image modality is off
  CaptionFeatures caption;
  std::optional<DiscourseLabel> label;
};

class DiscourseModel {
 public:
  struct Trace {
    Mat image_raw;
    FusionLayer::Trace fusion;
    ClassifierHead::Trace head;
  };

  struct Forward {
    FusionOutput fusion;
    Row logits;
    Row probs;
  };

  DiscourseModel() = default;
  explicit DiscourseModel(const ModelConfig& config);

  Forward forward(const EncodedPost& post, Trace* trace = nullptr) const;
  void backward(const Trace& trace, const Row& d_logits);

  NamedParams params();
  void zero_grad();
  double parameter_norm();
  const ModelConfig& config() const { return config_; }

  ImageProjection projection;
  FusionLayer fusion;
  ClassifierHead head;

 private:
  ModelConfig config_;
};

}  // namespace xmdisc
