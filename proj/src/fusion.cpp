#include "xmdisc/fusion.hpp"

#include <cctype>

#include "xmdisc/errors.hpp"

namespace xmdisc {
namespace {

Row mean_rows(const Mat& m) { return m.colwise().mean(); }

}  // namespace

std::string_view fusion_name(FusionStrategy strategy) {
  switch (strategy) {
    case FusionStrategy::MultiheadAtt: return "multihead";
    case FusionStrategy::ConcatFuse: return "concat";
    case FusionStrategy::Attention: return "attention";
    case FusionStrategy::CoAttention: return "coattention";
  }
  return "?";
}

FusionStrategy parse_fusion(std::string_view name) {
  for (auto s : {FusionStrategy::MultiheadAtt, FusionStrategy::ConcatFuse, FusionStrategy::Attention,
                 FusionStrategy::CoAttention}) {
    if (fusion_name(s) == name) return s;
  }
  throw ConfigError("unknown fusion strategy '" + std::string(name) +
                    "' (expected multihead, concat, attention or coattention)");
}

ModalitySet ModalitySet::parse(std::string_view list) {
  ModalitySet set{false, false, false};
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t end = std::min(list.find(',', start), list.size());
    std::string_view item = list.substr(start, end - start);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
    if (item == "text") {
      set.text = true;
    } else if (item == "image") {
      set.image = true;
    } else if (item == "caption") {
      set.caption = true;
    } else if (!item.empty()) {
      throw ConfigError("unknown modality '" + std::string(item) + "'");
    }
    start = end + 1;
  }
  if (set.empty()) throw ConfigError("modality subset must not be empty");
  return set;
}

std::string ModalitySet::str() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(text, "text");
  add(image, "image");
  add(caption, "caption");
  return out;
}

Mat FusionOutput::mean_image_attention() const {
  if (image_attention.empty()) return {};
  Mat mean = Mat::Zero(image_attention.front().rows(), image_attention.front().cols());
  for (const auto& head : image_attention) mean += head;
  return mean / static_cast<double>(image_attention.size());
}

FusionLayer::FusionLayer(FusionStrategy strategy, const AttentionConfig& config, Rng& rng)
    : strategy_(strategy), config_(config) {
  config_.validate();
  if (strategy == FusionStrategy::MultiheadAtt) {
    image_attention = MultiHeadAttention(config, rng);
    caption_attention = MultiHeadAttention(config, rng);
  }
}

FusionOutput FusionLayer::forward(const TextFeatures& text, const ImageFeatures& image,
                                  const CaptionFeatures& caption, const ModalitySet& modalities,
                                  Trace* trace) const {
  const int d = config_.model_dim;
  if (modalities.text && text.pooled.size() != d) {
    throw ShapeError("text features have width " + std::to_string(text.pooled.size()) +
                     ", fusion expects " + std::to_string(d));
  }
  if (modalities.image && (image.regions.cols() != d || image.regions.rows() == 0)) {
    throw ShapeError("image regions are " + shape_str(image.regions) + ", fusion expects Mx" +
                     std::to_string(d));
  }
  if (modalities.caption && (caption.states.cols() != d || caption.states.rows() == 0)) {
    throw ShapeError("caption states are " + shape_str(caption.states) + ", fusion expects Nx" +
                     std::to_string(d));
  }

  FusionOutput out;
  out.strategy = strategy_;
  const Mat query = modalities.text ? Mat(text.pooled) : Mat(Mat::Zero(1, d));
  if (trace) {
    trace->query = query;
    if (modalities.image) trace->image_regions = image.regions;
    if (modalities.caption) trace->caption_states = caption.states;
  }

  // text part
  out.text_part = Row::Zero(d);
  if (modalities.text) {
    if (strategy_ == FusionStrategy::CoAttention) {
      const Mat summary = modalities.image ? Mat(mean_rows(image.regions)) : Mat(Mat::Zero(1, d));
      AttentionOutput att = scaled_dot_attention(summary, text.states, text.states);
      out.text_part = att.output.row(0);
      if (trace) {
        trace->text_states = text.states;
        trace->image_summary = summary;
        trace->text_weights = std::move(att.weights);
      }
    } else {
      out.text_part = text.pooled;
    }
  }

  auto attend = [&](const Mat& keys, const MultiHeadAttention& mha, MultiHeadAttention::Trace* mha_trace,
                    Mat* single_weights, std::vector<Mat>& weights_out) -> Row {
    switch (strategy_) {
      case FusionStrategy::MultiheadAtt: {
        auto res = mha.forward(query, keys, keys, mha_trace);
        weights_out = std::move(res.weights);
        return res.output.row(0);
      }
      case FusionStrategy::Attention:
      case FusionStrategy::CoAttention: {
        auto res = scaled_dot_attention(query, keys, keys);
        weights_out = {res.weights};
        if (single_weights) *single_weights = res.weights;
        return res.output.row(0);
      }
      case FusionStrategy::ConcatFuse:
        return mean_rows(keys);
    }
    throw ConfigError("unknown fusion strategy");
  };

  out.attended_image = Row::Zero(d);
  if (modalities.image) {
    out.attended_image = attend(image.regions, image_attention, trace ? &trace->image_mha : nullptr,
                                trace ? &trace->image_weights : nullptr, out.image_attention);
  }
  out.attended_caption = Row::Zero(d);
  if (modalities.caption) {
    out.attended_caption = attend(caption.states, caption_attention, trace ? &trace->caption_mha : nullptr,
                                  trace ? &trace->caption_weights : nullptr, out.caption_attention);
  }

  out.fused.resize(3 * d);
  out.fused << out.attended_caption, out.text_part, out.attended_image;
  return out;
}

Mat FusionLayer::backward(const Trace& trace, const ModalitySet& modalities, const Row& d_fused) {
  const int d = config_.model_dim;
  const Mat d_caption = d_fused.segment(0, d);
  const Mat d_text = d_fused.segment(d, d);
  const Mat d_image = d_fused.segment(2 * d, d);

  Mat d_regions;
  if (modalities.image) d_regions = Mat::Zero(trace.image_regions.rows(), d);

  if (modalities.caption && strategy_ == FusionStrategy::MultiheadAtt) {
    caption_attention.backward(trace.caption_mha, d_caption);
  }

  if (modalities.image) {
    const Mat& regions = trace.image_regions;
    switch (strategy_) {
      case FusionStrategy::MultiheadAtt: {
        const auto g = image_attention.backward(trace.image_mha, d_image);
        d_regions += g.d_key + g.d_value;
        break;
      }
      case FusionStrategy::Attention:
      case FusionStrategy::CoAttention: {
        const auto g = scaled_dot_attention_backward(trace.query, regions, regions, trace.image_weights, d_image);
        d_regions += g.d_key + g.d_value;
        break;
      }
      case FusionStrategy::ConcatFuse:
        d_regions.rowwise() += d_image.row(0) / static_cast<double>(regions.rows());
        break;
    }
    if (strategy_ == FusionStrategy::CoAttention && modalities.text) {
      const auto g = scaled_dot_attention_backward(trace.image_summary, trace.text_states, trace.text_states,
                                                   trace.text_weights, d_text);
      d_regions.rowwise() += g.d_query.row(0) / static_cast<double>(regions.rows());
    }
  }
  return d_regions;
}

NamedParams FusionLayer::params() {
  if (strategy_ != FusionStrategy::MultiheadAtt) return {};
  NamedParams out = image_attention.params("fusion.image_attention.");
  for (auto& p : caption_attention.params("fusion.caption_attention.")) out.push_back(p);
  return out;
}

}  // namespace xmdisc
