#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "xmdisc/corpus.hpp"
#include "xmdisc/rng.hpp"

namespace fixtures {

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

// Writes `n` posts with synthetic images to `dir`/dataset.jsonl, cycling
// through the five labels. Captions are filled unless `with_captions` is
// false. Returns the dataset path.
std::filesystem::path synthetic_corpus(const std::filesystem::path& dir, int n, std::uint64_t seed,
                                       bool with_captions = true);

// Solid-colour BGR image written as PNG.
std::filesystem::path solid_image(const std::filesystem::path& path, int width, int height,
                                  unsigned char b, unsigned char g, unsigned char r);

std::filesystem::path test_data(const std::string& name);

}  // namespace fixtures

#include "xmdisc/config.hpp"

namespace fixtures {

// Small dimensions for fast end-to-end runs on stub backends.
xmdisc::RunConfig small_run_config();

}  // namespace fixtures
