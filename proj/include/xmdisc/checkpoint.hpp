#pragma once

#include <cstdint>
#include <filesystem>

#include "xmdisc/classifier.hpp"
#include "xmdisc/config.hpp"

namespace xmdisc {

// A checkpoint directory holds `checkpoint.json` (format tag, run config,
// label-code mapping, split seed, class weights and a tensor index) and
// `params.bin` (little-endian float64 tensors, row-major, at the indexed
// offsets).
struct Checkpoint {
  DiscourseModel model;
  RunConfig config;
  std::uint64_t split_seed = 0;
  int best_epoch = 0;
  ClassWeights class_weights{};
};

void save_checkpoint(const std::filesystem::path& dir, DiscourseModel& model, const RunConfig& config,
                     std::uint64_t split_seed, int best_epoch, const ClassWeights& class_weights);

// Throws DataError if the stored label mapping differs from this build's.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace xmdisc
