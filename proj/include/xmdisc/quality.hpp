#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include <opencv2/core.hpp>

#include "xmdisc/corpus.hpp"

namespace xmdisc {

// "Bad pair" categories. Background is recognised as a manual annotation
// flag but is never produced by the automatic screen.
enum class QualityFlag { Portrait, Background, LowQuality, OcrSubtitle };

std::string_view quality_flag_name(QualityFlag flag);

struct QualityThresholds {
  double portrait = 0.5;
  double low_quality = 0.5;
  double ocr_subtitle = 0.3;
  // Laplacian variance at which an image counts as fully sharp.
  double sharpness_reference = 100.0;
  // Images whose shorter side is below this many pixels score LowQuality 1.
  int min_resolution = 64;
  // Face area fraction that saturates the portrait image component.
  double face_area_reference = 0.1;
  std::filesystem::path face_cascade;
};

struct QualityVerdict {
  std::string post_id;
  std::set<QualityFlag> flags;
  std::map<QualityFlag, double> scores;
};

// Individual detectors, exposed for calibration and testing.
double low_quality_score(const cv::Mat& image, const QualityThresholds& thresholds);
double text_coverage(const cv::Mat& image);
double face_area_fraction(const cv::Mat& image, const std::filesystem::path& cascade);
double quote_density(std::string_view text);

QualityVerdict quality_screen(const MultimediaPost& post, const cv::Mat& image,
                              const QualityThresholds& thresholds);
QualityVerdict quality_screen(const Dataset& dataset, const MultimediaPost& post,
                              const QualityThresholds& thresholds);

std::string verdict_to_json(const QualityVerdict& verdict);

// Bundled LBP frontal-face cascade, located relative to the install or
// source tree; empty if not found.
std::filesystem::path default_face_cascade();

}  // namespace xmdisc
