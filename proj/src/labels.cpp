#include "xmdisc/labels.hpp"

#include <string>

#include "xmdisc/errors.hpp"

namespace xmdisc {
namespace {

constexpr std::array<std::string_view, kNumLabels> kNames = {
    "insertion", "concretization", "projection", "restatement", "extension"};
constexpr std::array<std::string_view, kNumLabels> kAbbrevs = {
    "Ins", "Con", "Pro", "Res", "Ext"};

}  // namespace

DiscourseLabel label_from_code(int code) {
  if (code < 0 || code >= kNumLabels) {
    throw DataError("label code out of range: " + std::to_string(code));
  }
  return static_cast<DiscourseLabel>(code);
}

std::string_view label_name(DiscourseLabel label) {
  return kNames[label_code(label)];
}

std::string_view label_abbrev(DiscourseLabel label) {
  return kAbbrevs[label_code(label)];
}

std::optional<DiscourseLabel> parse_label(std::string_view name) {
  for (int i = 0; i < kNumLabels; ++i) {
    if (kNames[i] == name) return static_cast<DiscourseLabel>(i);
  }
  return std::nullopt;
}

}  // namespace xmdisc
