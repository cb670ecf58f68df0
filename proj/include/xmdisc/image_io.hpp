#pragma once

#include <filesystem>

#include <opencv2/core.hpp>

namespace xmdisc {

// Decodes an image as 8-bit BGR. Throws DataError naming the path when the
// file is missing or cannot be decoded.
cv::Mat decode_image(const std::filesystem::path& path);

}  // namespace xmdisc
