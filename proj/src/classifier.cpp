#include "xmdisc/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "xmdisc/errors.hpp"

namespace xmdisc {

ClassifierHead::ClassifierHead(int input_dim, int hidden_dim, Rng& rng)
    : w_hidden(input_dim, hidden_dim), b_hidden(1, hidden_dim), w_out(hidden_dim, kNumLabels),
      b_out(1, kNumLabels) {
  fill_uniform(w_hidden.value, xavier_limit(input_dim, hidden_dim), rng);
  fill_uniform(w_out.value, xavier_limit(hidden_dim, kNumLabels), rng);
}

Row ClassifierHead::logits(const Row& fused, Trace* trace) const {
  if (fused.size() != w_hidden.value.rows()) {
    throw ShapeError("classifier expects input of length " + std::to_string(w_hidden.value.rows()) +
                     ", got " + std::to_string(fused.size()));
  }
  Row hidden = ((fused * w_hidden.value) + b_hidden.value.row(0)).array().tanh().matrix();
  Row out = hidden * w_out.value + b_out.value.row(0);
  if (trace) {
    trace->input = fused;
    trace->hidden = std::move(hidden);
  }
  return out;
}

Row ClassifierHead::backward(const Trace& trace, const Row& d_logits) {
  w_out.grad.noalias() += trace.hidden.transpose() * d_logits;
  b_out.grad += d_logits;
  const Row d_hidden = d_logits * w_out.value.transpose();
  const Row d_pre = d_hidden.cwiseProduct((1.0 - trace.hidden.array().square()).matrix());
  w_hidden.grad.noalias() += trace.input.transpose() * d_pre;
  b_hidden.grad += d_pre;
  return d_pre * w_hidden.value.transpose();
}

NamedParams ClassifierHead::params(const std::string& prefix) {
  return {{prefix + "w_hidden", &w_hidden},
          {prefix + "b_hidden", &b_hidden},
          {prefix + "w_out", &w_out},
          {prefix + "b_out", &b_out}};
}

Row softmax(const Row& logits) { return softmax_rows(logits); }

Row predict(const FusionOutput& fused, const ClassifierHead& head) {
  return softmax(head.logits(fused.fused));
}

DiscourseLabel argmax_label(const Row& probs) {
  Eigen::Index best = 0;
  probs.maxCoeff(&best);
  return label_from_code(static_cast<int>(best));
}

ClassWeights class_weights(const LabelCounts& counts) {
  std::size_t total = 0;
  for (int c = 0; c < kNumLabels; ++c) {
    if (counts[c] == 0) {
      throw DataError("class weight undefined: no training examples for label '" +
                      std::string(label_name(label_from_code(c))) + "'");
    }
    total += counts[c];
  }
  ClassWeights weights{};
  for (int c = 0; c < kNumLabels; ++c) {
    weights[c] = static_cast<double>(total) / (kNumLabels * static_cast<double>(counts[c]));
  }
  return weights;
}

LabelCounts count_labels(const std::vector<DiscourseLabel>& labels) {
  LabelCounts counts{};
  for (auto l : labels) ++counts[label_code(l)];
  return counts;
}

namespace {

void check_batch(std::size_t n_rows, const std::vector<DiscourseLabel>& labels, const ClassWeights& weights) {
  if (n_rows != labels.size()) {
    throw ShapeError("batch has " + std::to_string(n_rows) + " predictions but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (n_rows == 0) throw ShapeError("empty batch");
  for (double w : weights) {
    if (!(w > 0.0)) throw ConfigError("class weights must be strictly positive");
  }
}

}  // namespace

double weighted_cross_entropy(const std::vector<Row>& probs, const std::vector<DiscourseLabel>& labels,
                              const ClassWeights& weights) {
  check_batch(probs.size(), labels, weights);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i].size() != kNumLabels) throw ShapeError("probability vectors must have 5 entries");
    const int y = label_code(labels[i]);
    const double w = weights[y];
    num += w * -std::log(std::max(probs[i][y], 1e-12));
    den += w;
  }
  return num / den;
}

double weighted_cross_entropy_logits(const std::vector<Row>& logits,
                                     const std::vector<DiscourseLabel>& labels,
                                     const ClassWeights& weights, std::vector<Row>* d_logits) {
  check_batch(logits.size(), labels, weights);
  double den = 0.0;
  for (auto l : labels) den += weights[label_code(l)];
  double num = 0.0;
  if (d_logits) d_logits->assign(logits.size(), Row());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const int y = label_code(labels[i]);
    const Row& z = logits[i];
    const double mx = z.maxCoeff();
    const double log_norm = mx + std::log((z.array() - mx).exp().sum());
    num += weights[y] * (log_norm - z[y]);
    if (d_logits) {
      Row g = (z.array() - log_norm).exp().matrix();
      g[y] -= 1.0;
      (*d_logits)[i] = g * (weights[y] / den);
    }
  }
  return num / den;
}

void ModelConfig::validate() const {
  attention().validate();
  if (grid < 1) throw ConfigError("grid must be at least 1");
  if (raw_channels < 1) throw ConfigError("raw-channels must be positive");
  if (text_cap < 1 || text_cap > kMaxSequenceTokens) {
    throw ConfigError("text-cap must be in [1, " + std::to_string(kMaxSequenceTokens) + "]");
  }
  if (caption_cap < 1 || caption_cap > kMaxSequenceTokens) {
    throw ConfigError("caption-cap must be in [1, " + std::to_string(kMaxSequenceTokens) + "]");
  }
  if (modalities.empty()) throw ConfigError("modality subset must not be empty");
}

DiscourseModel::DiscourseModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(splitmix64(config.seed));
  projection = ImageProjection(config.raw_channels, config.hidden_size, rng);
  fusion = FusionLayer(config.fusion, config.attention(), rng);
  head = ClassifierHead(3 * config.hidden_size, config.hidden_size, rng);
}

DiscourseModel::Forward DiscourseModel::forward(const EncodedPost& post, Trace* trace) const {
  ImageFeatures image;
  if (config_.modalities.image) {
    image.regions = projection.apply(post.image_raw);
    image.grid = config_.grid;
    image.raw_channels = config_.raw_channels;
  }
  Forward out;
  out.fusion = fusion.forward(post.text, image, post.caption, config_.modalities,
                              trace ? &trace->fusion : nullptr);
  out.logits = head.logits(out.fusion.fused, trace ? &trace->head : nullptr);
  out.probs = softmax(out.logits);
  if (trace && config_.modalities.image) trace->image_raw = post.image_raw;
  return out;
}

void DiscourseModel::backward(const Trace& trace, const Row& d_logits) {
  const Row d_fused = head.backward(trace.head, d_logits);
  const Mat d_regions = fusion.backward(trace.fusion, config_.modalities, d_fused);
  if (config_.modalities.image) projection.backward(trace.image_raw, d_regions);
}

NamedParams DiscourseModel::params() {
  NamedParams out = projection.params("projection.");
  for (auto& p : fusion.params()) out.push_back(p);
  for (auto& p : head.params("head.")) out.push_back(p);
  return out;
}

void DiscourseModel::zero_grad() {
  for (auto& [_, p] : params()) p->zero_grad();
}

double DiscourseModel::parameter_norm() {
  double sq = 0.0;
  for (auto& [_, p] : params()) sq += p->value.squaredNorm();
  return std::sqrt(sq);
}

}  // namespace xmdisc
