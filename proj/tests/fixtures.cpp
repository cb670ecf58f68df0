#include "fixtures.hpp"

#include <fstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#ifndef XMDISC_TEST_DATA_DIR
#define XMDISC_TEST_DATA_DIR "."
#endif

namespace fixtures {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("xmdisc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::filesystem::path solid_image(const std::filesystem::path& path, int width, int height,
                                  unsigned char b, unsigned char g, unsigned char r) {
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(b, g, r));
  cv::imwrite(path.string(), img);
  return path;
}

std::filesystem::path synthetic_corpus(const std::filesystem::path& dir, int n, std::uint64_t seed,
                                       bool with_captions) {
  static const char* kWords[] = {"sun",   "city", "dog",   "beach", "game",  "team", "cat",  "rain",
                                 "music", "food", "night", "road",  "happy", "new",  "great", "look",
                                 "today", "park", "tree",  "love",  "win",   "sky",  "car",   "home"};
  xmdisc::Rng rng(seed);
  std::filesystem::create_directories(dir / "images");
  std::vector<xmdisc::MultimediaPost> posts;
  for (int i = 0; i < n; ++i) {
    xmdisc::MultimediaPost post;
    post.id = "p" + std::to_string(i);
    const int length = 4 + static_cast<int>(rng.below(10));
    for (int t = 0; t < length; ++t) {
      if (t) post.text += ' ';
      post.text += kWords[rng.below(std::size(kWords))];
    }
    const auto label = xmdisc::label_from_code(i % xmdisc::kNumLabels);
    post.label = label;

    cv::Mat img(48, 64, CV_8UC3,
                cv::Scalar(static_cast<double>(rng.below(256)), static_cast<double>(rng.below(256)),
                           static_cast<double>(rng.below(256))));
    const int x = static_cast<int>(rng.below(40));
    const int y = static_cast<int>(rng.below(24));
    cv::rectangle(img, {x, y, 20, 20}, cv::Scalar(40.0 * xmdisc::label_code(label), 255, 0), cv::FILLED);
    post.image = "images/" + post.id + ".png";
    cv::imwrite((dir / post.image).string(), img);
    if (with_captions) post.caption = "a picture of a " + std::string(kWords[rng.below(std::size(kWords))]);
    posts.push_back(post);
  }
  auto path = dir / "dataset.jsonl";
  std::ofstream out(path, std::ios::binary);
  xmdisc::write_dataset(out, posts);
  return path;
}

std::filesystem::path test_data(const std::string& name) {
  return std::filesystem::path(XMDISC_TEST_DATA_DIR) / name;
}

}  // namespace fixtures

namespace fixtures {

xmdisc::RunConfig small_run_config() {
  xmdisc::RunConfig cfg;
  cfg.set("hidden-size", "16");
  cfg.set("heads", "2");
  cfg.set("grid", "4");
  cfg.set("raw-channels", "16");
  cfg.set("batch-size", "5");
  cfg.set("lr", "0.01");
  cfg.set("max-epochs", "10");
  cfg.set("patience", "10");
  return cfg;
}

}  // namespace fixtures
