#pragma once

#include <string>
#include <vector>

#include "xmdisc/tensor.hpp"

namespace xmdisc {

struct AttentionOutput {
  Mat output;   // q x d_v
  Mat weights;  // q x m, rows are softmax distributions
};

// softmax(Q K^T / sqrt(d_k)) V with d_k = K.cols().
AttentionOutput scaled_dot_attention(const Mat& query, const Mat& key, const Mat& value);

struct AttentionInputGrads {
  Mat d_query;
  Mat d_key;
  Mat d_value;
};

AttentionInputGrads scaled_dot_attention_backward(const Mat& query, const Mat& key, const Mat& value,
                                                  const Mat& weights, const Mat& d_output);

struct AttentionConfig {
  int n_heads = 6;
  int model_dim = 768;

  int head_dim() const { return model_dim / n_heads; }
  void validate() const;
};

// Bias-free multi-head attention: each head attends with its own column
// block of the query/key/value projections, and the concatenated head
// outputs are mapped back to model_dim by the output projection.
class MultiHeadAttention {
 public:
  struct Output {
    Mat output;                // q x d
    std::vector<Mat> weights;  // one q x m matrix per head
  };

  // Intermediates kept for the backward pass.
  struct Trace {
    Mat query, key, value;
    std::vector<Mat> q_heads, k_heads, v_heads, weights;
    Mat concat;
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(const AttentionConfig& config, Rng& rng);

  Output forward(const Mat& query, const Mat& key, const Mat& value, Trace* trace = nullptr) const;

  // Accumulates parameter gradients; returns gradients w.r.t. the inputs.
  AttentionInputGrads backward(const Trace& trace, const Mat& d_output);

  NamedParams params(const std::string& prefix);
  const AttentionConfig& config() const { return config_; }

  Param w_query;  // d x d, head j owns columns [j*d_k, (j+1)*d_k)
  Param w_key;
  Param w_value;
  Param w_out;  // (n_heads*d_k) x d

 private:
  AttentionConfig config_;
};

}  // namespace xmdisc
