#include "xmdisc/quality.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/objdetect.hpp>

#include "xmdisc/errors.hpp"
#include "xmdisc/image_io.hpp"

#ifndef XMDISC_SOURCE_DATA_DIR
#define XMDISC_SOURCE_DATA_DIR ""
#endif

namespace xmdisc {
namespace {

cv::Mat to_gray(const cv::Mat& image) {
  if (image.channels() == 1) return image;
  cv::Mat gray;
  cv::cvtColor(image, gray, cv::COLOR_BGR2GRAY);
  return gray;
}

cv::CascadeClassifier& cascade_for(const std::filesystem::path& path) {
  thread_local std::map<std::string, cv::CascadeClassifier> cache;
  auto it = cache.find(path.string());
  if (it != cache.end()) return it->second;
  cv::CascadeClassifier classifier;
  if (path.empty() || !classifier.load(path.string())) {
    throw ConfigError("cannot load face cascade: '" + path.string() + "'");
  }
  return cache.emplace(path.string(), std::move(classifier)).first->second;
}

}  // namespace

std::string_view quality_flag_name(QualityFlag flag) {
  switch (flag) {
    case QualityFlag::Portrait: return "portrait";
    case QualityFlag::Background: return "background";
    case QualityFlag::LowQuality: return "low_quality";
    case QualityFlag::OcrSubtitle: return "ocr_subtitle";
  }
  return "?";
}

std::filesystem::path default_face_cascade() {
  const char* name = "lbpcascade_frontalface.xml";
  std::vector<std::filesystem::path> candidates;
  if (const char* dir = std::getenv("XMDISC_DATA_DIR")) candidates.emplace_back(dir);
  candidates.emplace_back(XMDISC_SOURCE_DATA_DIR);
  for (const auto& dir : candidates) {
    if (dir.empty()) continue;
    if (std::filesystem::is_regular_file(dir / name)) return dir / name;
  }
  return {};
}

double low_quality_score(const cv::Mat& image, const QualityThresholds& thresholds) {
  if (std::min(image.rows, image.cols) < thresholds.min_resolution) return 1.0;
  cv::Mat laplacian;
  cv::Laplacian(to_gray(image), laplacian, CV_64F);
  cv::Scalar mean, stddev;
  cv::meanStdDev(laplacian, mean, stddev);
  const double variance = stddev[0] * stddev[0];
  const double sharpness = std::min(1.0, variance / thresholds.sharpness_reference);
  return 1.0 - sharpness;
}

// Text lines show up as dense runs of strong gradients: threshold the
// morphological gradient, join characters horizontally, then keep wide
// and well-filled boxes. Returns the union box area over image area.
double text_coverage(const cv::Mat& image) {
  const cv::Mat gray = to_gray(image);
  const int h = gray.rows;
  const int w = gray.cols;

  cv::Mat gradient;
  cv::morphologyEx(gray, gradient, cv::MORPH_GRADIENT,
                   cv::getStructuringElement(cv::MORPH_ELLIPSE, {3, 3}));
  cv::Mat binary;
  cv::threshold(gradient, binary, 0, 255, cv::THRESH_BINARY | cv::THRESH_OTSU);
  cv::Mat joined;
  cv::morphologyEx(binary, joined, cv::MORPH_CLOSE,
                   cv::getStructuringElement(cv::MORPH_RECT, {std::max(3, w / 40), 1}));

  std::vector<std::vector<cv::Point>> contours;
  cv::findContours(joined, contours, cv::RETR_EXTERNAL, cv::CHAIN_APPROX_SIMPLE);

  cv::Mat mask = cv::Mat::zeros(gray.size(), CV_8U);
  for (const auto& contour : contours) {
    const cv::Rect box = cv::boundingRect(contour);
    if (box.height < 6 || box.width < 12 || box.height > h / 5) continue;
    if (box.width < 1.5 * box.height) continue;
    const double fill = cv::countNonZero(binary(box)) / static_cast<double>(box.area());
    if (fill < 0.25) continue;
    mask(box).setTo(255);
  }
  return cv::countNonZero(mask) / static_cast<double>(h * w);
}

double face_area_fraction(const cv::Mat& image, const std::filesystem::path& cascade) {
  cv::Mat gray;
  cv::equalizeHist(to_gray(image), gray);
  std::vector<cv::Rect> faces;
  cascade_for(cascade).detectMultiScale(gray, faces, 1.1, 4, 0, {24, 24});
  cv::Mat mask = cv::Mat::zeros(gray.size(), CV_8U);
  for (const auto& f : faces) mask(f & cv::Rect(0, 0, gray.cols, gray.rows)).setTo(255);
  return cv::countNonZero(mask) / static_cast<double>(gray.rows * gray.cols);
}

double quote_density(std::string_view text) {
  std::size_t marks = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '"') {
      ++marks;
    } else if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80) {
      // U+201C / U+201D curly double quotes
      const auto t = static_cast<unsigned char>(text[i + 2]);
      if (t == 0x9C || t == 0x9D) ++marks;
    } else if (c == 0xC2 && i + 1 < text.size()) {
      // U+00AB / U+00BB guillemets
      const auto t = static_cast<unsigned char>(text[i + 1]);
      if (t == 0xAB || t == 0xBB) ++marks;
    }
  }
  const std::size_t tokens = whitespace_token_count(text);
  return tokens == 0 ? 0.0 : static_cast<double>(marks) / static_cast<double>(tokens);
}

QualityVerdict quality_screen(const MultimediaPost& post, const cv::Mat& image,
                              const QualityThresholds& thresholds) {
  if (image.empty()) throw DataError("post '" + post.id + "': empty image");
  QualityVerdict verdict;
  verdict.post_id = post.id;

  verdict.scores[QualityFlag::LowQuality] = low_quality_score(image, thresholds);
  verdict.scores[QualityFlag::OcrSubtitle] = std::clamp(text_coverage(image), 0.0, 1.0);

  const auto cascade =
      thresholds.face_cascade.empty() ? default_face_cascade() : thresholds.face_cascade;
  const double face = std::min(1.0, face_area_fraction(image, cascade) / thresholds.face_area_reference);
  const double quotes = std::min(1.0, 4.0 * quote_density(post.text));
  verdict.scores[QualityFlag::Portrait] = 0.5 * face + 0.5 * quotes;

  const std::map<QualityFlag, double> limits = {
      {QualityFlag::LowQuality, thresholds.low_quality},
      {QualityFlag::OcrSubtitle, thresholds.ocr_subtitle},
      {QualityFlag::Portrait, thresholds.portrait}};
  for (const auto& [flag, score] : verdict.scores) {
    if (score > limits.at(flag)) verdict.flags.insert(flag);
  }
  return verdict;
}

QualityVerdict quality_screen(const Dataset& dataset, const MultimediaPost& post,
                              const QualityThresholds& thresholds) {
  return quality_screen(post, decode_image(dataset.image_path(post)), thresholds);
}

std::string verdict_to_json(const QualityVerdict& verdict) {
  nlohmann::ordered_json record;
  record["id"] = verdict.post_id;
  auto flags = nlohmann::ordered_json::array();
  for (auto f : verdict.flags) flags.push_back(std::string(quality_flag_name(f)));
  record["flags"] = flags;
  auto scores = nlohmann::ordered_json::object();
  for (const auto& [f, s] : verdict.scores) scores[std::string(quality_flag_name(f))] = s;
  record["scores"] = scores;
  return record.dump();
}

}  // namespace xmdisc
