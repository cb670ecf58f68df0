#include "xmdisc/image_io.hpp"

#include <opencv2/imgcodecs.hpp>

#include "xmdisc/errors.hpp"

namespace xmdisc {

cv::Mat decode_image(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw DataError("image not found: " + path.string());
  }
  cv::Mat image = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (image.empty()) {
    throw DataError("cannot decode image: " + path.string());
  }
  return image;
}

}  // namespace xmdisc
