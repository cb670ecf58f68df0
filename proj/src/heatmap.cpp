#include "xmdisc/heatmap.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "xmdisc/errors.hpp"
#include "xmdisc/image_io.hpp"

namespace xmdisc {
namespace {

int grid_side(const Mat& weights) {
  const auto cells = weights.size();
  const auto side = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(cells))));
  if (side * side != cells || cells == 0) {
    throw ShapeError("attention over " + std::to_string(cells) + " regions is not a square grid");
  }
  return static_cast<int>(side);
}

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string format_grid(const Mat& weights) {
  const int m = grid_side(weights);
  std::string out;
  char buf[32];
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", weights(0, r * m + c));
      if (c) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Mat parse_grid(const std::string& text) {
  std::istringstream in(text);
  std::vector<double> values;
  std::string token;
  while (in >> token) values.push_back(std::strtod(token.c_str(), nullptr));
  Mat out(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out(0, static_cast<Eigen::Index>(i)) = values[i];
  grid_side(out);
  return out;
}

cv::Mat render_overlay(const cv::Mat& image, const Mat& weights, double alpha) {
  const int m = grid_side(weights);
  cv::Mat grid(m, m, CV_64F);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) grid.at<double>(r, c) = weights(0, r * m + c);
  }
  double lo = 0.0, hi = 0.0;
  cv::minMaxLoc(grid, &lo, &hi);
  cv::Mat normalized;
  if (hi > lo) {
    normalized = (grid - lo) / (hi - lo);
  } else {
    normalized = cv::Mat(m, m, CV_64F, cv::Scalar(0.5));
  }
  cv::Mat upsampled;
  cv::resize(normalized, upsampled, image.size(), 0, 0, cv::INTER_LINEAR);
  cv::Mat heat8;
  upsampled.convertTo(heat8, CV_8U, 255.0);
  cv::Mat colored;
  cv::applyColorMap(heat8, colored, cv::COLORMAP_JET);
  cv::Mat blended;
  cv::addWeighted(image, 1.0 - alpha, colored, alpha, 0.0, blended);
  return blended;
}

HeatmapFiles export_heatmap(const MultimediaPost& post, const std::filesystem::path& image,
                            const FusionOutput& fusion, const std::filesystem::path& out_dir, bool per_head) {
  if (!fusion.has_attention()) throw ConfigError("strategy has no attention weights");
  const cv::Mat bgr = decode_image(image);
  std::filesystem::create_directories(out_dir);
  const std::string stem = safe_name(post.id);

  HeatmapFiles files;
  if (per_head) {
    for (std::size_t k = 0; k < fusion.image_attention.size(); ++k) {
      auto path = out_dir / (stem + "_head" + std::to_string(k) + ".txt");
      write_text(path, format_grid(fusion.image_attention[k]));
      files.grids.push_back(path);
    }
  }
  const Mat mean = fusion.mean_image_attention();
  auto mean_path = out_dir / (stem + "_mean.txt");
  write_text(mean_path, format_grid(mean));
  files.grids.push_back(mean_path);

  files.overlay = out_dir / (stem + "_overlay.png");
  if (!cv::imwrite(files.overlay.string(), render_overlay(bgr, mean))) {
    throw DataError("cannot write " + files.overlay.string());
  }
  return files;
}

void write_attention_dump(std::ostream& out, const std::string& post_id, const FusionOutput& fusion) {
  nlohmann::ordered_json record;
  record["id"] = post_id;
  record["strategy"] = std::string(fusion_name(fusion.strategy));
  auto heads = nlohmann::ordered_json::array();
  for (const auto& h : fusion.image_attention) {
    heads.push_back(std::vector<double>(h.data(), h.data() + h.size()));
  }
  record["heads"] = heads;
  out << record.dump() << '\n';
}

}  // namespace xmdisc
