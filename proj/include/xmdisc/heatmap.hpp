#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "xmdisc/corpus.hpp"
#include "xmdisc/fusion.hpp"

namespace xmdisc {

struct HeatmapFiles {
  std::vector<std::filesystem::path> grids;  // per-head grids (if requested) then the mean grid
  std::filesystem::path overlay;
};

// M x M text grid, row-major, space-delimited, values printed with enough
// digits to round-trip exactly. `weights` is 1 x M^2.
std::string format_grid(const Mat& weights);
Mat parse_grid(const std::string& text);  // returns 1 x M^2

// Attention grid upsampled bilinearly to the image size, colour-mapped and
// alpha-blended over the image.
cv::Mat render_overlay(const cv::Mat& image, const Mat& weights, double alpha = 0.5);

// Writes <id>_mean.txt, optionally <id>_head<k>.txt for every head, and
// <id>_overlay.png into `out_dir`. Throws for strategies without attention.
HeatmapFiles export_heatmap(const MultimediaPost& post, const std::filesystem::path& image,
                            const FusionOutput& fusion, const std::filesystem::path& out_dir,
                            bool per_head = false);

// One JSON line {id, strategy, heads: [[M^2 weights], ...]}.
void write_attention_dump(std::ostream& out, const std::string& post_id, const FusionOutput& fusion);

}  // namespace xmdisc
