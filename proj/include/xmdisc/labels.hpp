#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace xmdisc {

// Cross-modality discourse relations. The integer codes are stable and are
// used as row/column indices in confusion matrices and label files.
enum class DiscourseLabel : std::uint8_t {
  Insertion = 0,
  Concretization = 1,
  Projection = 2,
  Restatement = 3,
  Extension = 4,
};

inline constexpr int kNumLabels = 5;

inline constexpr std::array<DiscourseLabel, kNumLabels> kAllLabels = {
    DiscourseLabel::Insertion, DiscourseLabel::Concretization,
    DiscourseLabel::Projection, DiscourseLabel::Restatement,
    DiscourseLabel::Extension};

constexpr int label_code(DiscourseLabel label) {
  return static_cast<int>(label);
}

DiscourseLabel label_from_code(int code);

// Lower-case wire name, e.g. "insertion".
std::string_view label_name(DiscourseLabel label);

// Three-letter column header, e.g. "Ins".
std::string_view label_abbrev(DiscourseLabel label);

std::optional<DiscourseLabel> parse_label(std::string_view name);

}  // namespace xmdisc
