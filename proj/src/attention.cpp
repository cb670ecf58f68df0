#include "xmdisc/attention.hpp"

#include <cmath>

#include "xmdisc/errors.hpp"

namespace xmdisc {

AttentionOutput scaled_dot_attention(const Mat& query, const Mat& key, const Mat& value) {
  if (key.rows() == 0) throw ShapeError("attention over an empty key set");
  if (key.rows() != value.rows()) {
    throw ShapeError("key " + shape_str(key) + " and value " + shape_str(value) + " row counts differ");
  }
  if (query.cols() != key.cols()) {
    throw ShapeError("query " + shape_str(query) + " and key " + shape_str(key) + " widths differ");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(key.cols()));
  AttentionOutput out;
  out.weights = softmax_rows((query * key.transpose()) * scale);
  out.output = out.weights * value;
  return out;
}

AttentionInputGrads scaled_dot_attention_backward(const Mat& query, const Mat& key, const Mat& value,
                                                  const Mat& weights, const Mat& d_output) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(key.cols()));
  AttentionInputGrads grads;
  grads.d_value = weights.transpose() * d_output;
  const Mat d_weights = d_output * value.transpose();
  // softmax Jacobian applied row-wise
  Mat d_scores = weights.cwiseProduct(d_weights);
  const Eigen::VectorXd row_dot = d_scores.rowwise().sum();
  d_scores -= weights.cwiseProduct(row_dot.replicate(1, weights.cols()));
  d_scores *= scale;
  grads.d_query = d_scores * key;
  grads.d_key = d_scores.transpose() * query;
  return grads;
}

void AttentionConfig::validate() const {
  if (n_heads < 1) throw ConfigError("number of heads must be at least 1");
  if (model_dim < 1) throw ConfigError("model dimension must be positive");
  if (model_dim % n_heads != 0) {
    throw ConfigError("model dimension " + std::to_string(model_dim) + " is not divisible by " +
                      std::to_string(n_heads) + " heads");
  }
}

MultiHeadAttention::MultiHeadAttention(const AttentionConfig& config, Rng& rng)
    : w_query(config.model_dim, config.model_dim),
      w_key(config.model_dim, config.model_dim),
      w_value(config.model_dim, config.model_dim),
      w_out(config.model_dim, config.model_dim),
      config_(config) {
  config_.validate();
  const double head_limit = xavier_limit(config.model_dim, config.head_dim());
  fill_uniform(w_query.value, head_limit, rng);
  fill_uniform(w_key.value, head_limit, rng);
  fill_uniform(w_value.value, head_limit, rng);
  fill_uniform(w_out.value, xavier_limit(config.model_dim, config.model_dim), rng);
}

MultiHeadAttention::Output MultiHeadAttention::forward(const Mat& query, const Mat& key, const Mat& value,
                                                       Trace* trace) const {
  const int d = config_.model_dim;
  if (query.cols() != d || key.cols() != d || value.cols() != d || key.rows() != value.rows()) {
    throw ShapeError("multi-head attention with model dim " + std::to_string(d) + " got query " +
                     shape_str(query) + ", key " + shape_str(key) + ", value " + shape_str(value));
  }
  const int dk = config_.head_dim();
  Output out;
  Mat concat(query.rows(), static_cast<Eigen::Index>(config_.n_heads) * dk);
  if (trace) {
    trace->query = query;
    trace->key = key;
    trace->value = value;
    trace->q_heads.clear();
    trace->k_heads.clear();
    trace->v_heads.clear();
  }
  for (int j = 0; j < config_.n_heads; ++j) {
    Mat qh = query * w_query.value.middleCols(j * dk, dk);
    Mat kh = key * w_key.value.middleCols(j * dk, dk);
    Mat vh = value * w_value.value.middleCols(j * dk, dk);
    AttentionOutput head = scaled_dot_attention(qh, kh, vh);
    concat.middleCols(j * dk, dk) = head.output;
    out.weights.push_back(std::move(head.weights));
    if (trace) {
      trace->q_heads.push_back(std::move(qh));
      trace->k_heads.push_back(std::move(kh));
      trace->v_heads.push_back(std::move(vh));
    }
  }
  out.output = concat * w_out.value;
  if (trace) {
    trace->weights = out.weights;
    trace->concat = std::move(concat);
  }
  return out;
}

AttentionInputGrads MultiHeadAttention::backward(const Trace& trace, const Mat& d_output) {
  const int dk = config_.head_dim();
  w_out.grad.noalias() += trace.concat.transpose() * d_output;
  const Mat d_concat = d_output * w_out.value.transpose();

  AttentionInputGrads grads{Mat::Zero(trace.query.rows(), trace.query.cols()),
                            Mat::Zero(trace.key.rows(), trace.key.cols()),
                            Mat::Zero(trace.value.rows(), trace.value.cols())};
  for (int j = 0; j < config_.n_heads; ++j) {
    const auto head = scaled_dot_attention_backward(trace.q_heads[j], trace.k_heads[j], trace.v_heads[j],
                                                    trace.weights[j], d_concat.middleCols(j * dk, dk));
    w_query.grad.middleCols(j * dk, dk).noalias() += trace.query.transpose() * head.d_query;
    w_key.grad.middleCols(j * dk, dk).noalias() += trace.key.transpose() * head.d_key;
    w_value.grad.middleCols(j * dk, dk).noalias() += trace.value.transpose() * head.d_value;
    grads.d_query.noalias() += head.d_query * w_query.value.middleCols(j * dk, dk).transpose();
    grads.d_key.noalias() += head.d_key * w_key.value.middleCols(j * dk, dk).transpose();
    grads.d_value.noalias() += head.d_value * w_value.value.middleCols(j * dk, dk).transpose();
  }
  return grads;
}

NamedParams MultiHeadAttention::params(const std::string& prefix) {
  return {{prefix + "w_query", &w_query},
          {prefix + "w_key", &w_key},
          {prefix + "w_value", &w_value},
          {prefix + "w_out", &w_out}};
}

}  // namespace xmdisc
