#include "xmdisc/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xmdisc/errors.hpp"
#include "xmdisc/rng.hpp"

namespace xmdisc {

EvalReport f1_report(const std::vector<DiscourseLabel>& predictions,
                     const std::vector<DiscourseLabel>& truths) {
  if (predictions.size() != truths.size()) {
    throw ShapeError("got " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(truths.size()) + " truths");
  }
  if (truths.empty()) throw ShapeError("cannot score an empty prediction list");

  EvalReport report;
  report.n = truths.size();
  for (std::size_t i = 0; i < truths.size(); ++i) {
    ++report.confusion[label_code(truths[i])][label_code(predictions[i])];
  }
  report.weighted_f1 = 0.0;
  for (int c = 0; c < kNumLabels; ++c) {
    std::size_t tp = report.confusion[c][c];
    std::size_t predicted = 0;
    std::size_t support = 0;
    for (int k = 0; k < kNumLabels; ++k) {
      predicted += report.confusion[k][c];
      support += report.confusion[c][k];
    }
    double f1 = 0.0;
    if (tp > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
      const double recall = static_cast<double>(tp) / static_cast<double>(support);
      f1 = 100.0 * 2.0 * precision * recall / (precision + recall);
    }
    report.per_class_f1[c] = f1;
    report.weighted_f1 += static_cast<double>(support) * f1;
  }
  report.weighted_f1 /= static_cast<double>(report.n);
  return report;
}

double significance(const std::vector<DiscourseLabel>& preds_a, const std::vector<DiscourseLabel>& preds_b,
                    const std::vector<DiscourseLabel>& truths, int trials, std::uint64_t seed) {
  if (preds_a.size() != truths.size() || preds_b.size() != truths.size()) {
    throw ShapeError("significance test needs equally long prediction and truth lists");
  }
  if (trials < 1) throw ConfigError("significance test needs at least one trial");
  const double observed =
      std::abs(f1_report(preds_a, truths).weighted_f1 - f1_report(preds_b, truths).weighted_f1);

  Rng rng(seed);
  std::vector<DiscourseLabel> a(preds_a.size());
  std::vector<DiscourseLabel> b(preds_b.size());
  long reached = 0;
  for (int t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < truths.size(); ++i) {
      const bool swap = rng.coin();
      a[i] = swap ? preds_b[i] : preds_a[i];
      b[i] = swap ? preds_a[i] : preds_b[i];
    }
    const double delta = std::abs(f1_report(a, truths).weighted_f1 - f1_report(b, truths).weighted_f1);
    if (delta >= observed) ++reached;
  }
  return static_cast<double>(reached) / static_cast<double>(trials);
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json record;
  auto columns = nlohmann::ordered_json::array();
  auto values = nlohmann::ordered_json::array();
  auto per_class = nlohmann::ordered_json::object();
  for (auto label : kAllLabels) {
    columns.push_back(std::string(label_name(label)));
    values.push_back(report.per_class_f1[label_code(label)]);
    per_class[std::string(label_name(label))] = report.per_class_f1[label_code(label)];
  }
  columns.push_back("weighted_f1");
  values.push_back(report.weighted_f1);
  record["columns"] = columns;
  record["values"] = values;
  record["per_class_f1"] = per_class;
  record["weighted_f1"] = report.weighted_f1;
  record["n"] = report.n;
  auto confusion = nlohmann::ordered_json::array();
  for (const auto& row : report.confusion) confusion.push_back(row);
  record["confusion"] = confusion;
  if (report.significance) {
    record["significance"] = {{"baseline", report.significance->baseline},
                              {"p_value", report.significance->p_value}};
  }
  return record.dump(2) + "\n";
}

std::string render_report_header() {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-36s", "Method");
  out << buf;
  for (auto label : kAllLabels) {
    std::snprintf(buf, sizeof buf, "%16s", std::string(label_name(label)).c_str());
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%10s\n", "F1");
  out << buf;
  return out.str();
}

std::string render_report_row(const std::string& name, const EvalReport& report) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-36s", name.c_str());
  out << buf;
  for (double f1 : report.per_class_f1) {
    std::snprintf(buf, sizeof buf, "%16.2f", f1);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%10.2f\n", report.weighted_f1);
  out << buf;
  return out.str();
}

}  // namespace xmdisc
