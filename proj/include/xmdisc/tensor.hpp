#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "xmdisc/rng.hpp"

namespace xmdisc {

using Mat = Eigen::MatrixXd;
using Row = Eigen::RowVectorXd;

// A trainable tensor and its accumulated gradient.
struct Param {
  Mat value;
  Mat grad;

  Param() = default;
  Param(Eigen::Index rows, Eigen::Index cols)
      : value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using NamedParams = std::vector<std::pair<std::string, Param*>>;

// U(-limit, limit) fill, row-major order for reproducibility.
void fill_uniform(Mat& m, double limit, Rng& rng);
void fill_uniform(Row& v, double limit, Rng& rng);

// Glorot/Xavier uniform limit for a fan_in x fan_out weight.
double xavier_limit(Eigen::Index fan_in, Eigen::Index fan_out);

// Row-wise numerically stable softmax.
Mat softmax_rows(const Mat& logits);

std::string shape_str(const Mat& m);

}  // namespace xmdisc
