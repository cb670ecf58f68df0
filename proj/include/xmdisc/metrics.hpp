#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xmdisc/labels.hpp"

namespace xmdisc {

struct Significance {
  std::string baseline;
  double p_value = 1.0;
};

struct EvalReport {
  std::array<double, kNumLabels> per_class_f1{};  // 0-100 scale
  double weighted_f1 = 0.0;                        // 0-100 scale
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> confusion{};  // [truth][prediction]
  std::size_t n = 0;
  std::optional<Significance> significance;
};

// Per-class F1 (0 when the class has no true positives) and the
// support-weighted mean, both on a 0-100 scale.
EvalReport f1_report(const std::vector<DiscourseLabel>& predictions,
                     const std::vector<DiscourseLabel>& truths);

// Approximate randomization on the weighted-F1 difference: each trial swaps
// the two systems' predictions item-wise with probability 1/2 and counts
// trials whose |delta| reaches the observed |delta|. Returns count/trials.
double significance(const std::vector<DiscourseLabel>& preds_a, const std::vector<DiscourseLabel>& preds_b,
                    const std::vector<DiscourseLabel>& truths, int trials = 10000,
                    std::uint64_t seed = 0);

// Columns in table order: five labels then weighted F1.
std::string report_to_json(const EvalReport& report);
std::string render_report_row(const std::string& name, const EvalReport& report);
std::string render_report_header();

}  // namespace xmdisc
