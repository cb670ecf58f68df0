#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xmdisc/labels.hpp"

namespace xmdisc {

struct MultimediaPost {
  std::string id;
  std::string text;
  std::string image;  // as written in the dataset file, relative to its directory
  std::optional<std::string> caption;
  std::optional<DiscourseLabel> label;

  bool operator==(const MultimediaPost&) const = default;
};

// A loaded dataset file. `root` is the directory image paths resolve against.
struct Dataset {
  std::filesystem::path root;
  std::vector<MultimediaPost> posts;

  std::filesystem::path image_path(const MultimediaPost& post) const;
  const MultimediaPost& find(const std::string& id) const;
};

std::vector<MultimediaPost> parse_dataset(std::istream& in, bool require_labels);
Dataset load_dataset(const std::filesystem::path& path, bool require_labels);

// Canonical formatting: one compact record per line, keys in schema order.
void write_dataset(std::ostream& out, const std::vector<MultimediaPost>& posts);

// Number of whitespace-separated tokens.
std::size_t whitespace_token_count(std::string_view text);

// Returns one diagnostic per post whose image cannot be decoded.
std::vector<std::string> validate_images(const Dataset& dataset);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;

  bool operator==(const DatasetSplit&) const = default;
};

// 80/10/10 by count; validation and test get floor(n/10) each and the
// remainder goes to train. Independent of input order.
DatasetSplit make_split(const std::vector<MultimediaPost>& posts, std::uint64_t seed);

std::string split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const std::string& text);
DatasetSplit load_split(const std::filesystem::path& path);
void save_split(const DatasetSplit& split, const std::filesystem::path& path);

struct CorpusStats {
  std::array<std::size_t, kNumLabels> counts{};
  std::array<double, kNumLabels> mean_length{};
  std::array<bool, kNumLabels> empty{};
  std::size_t total = 0;
  double total_mean_length = 0.0;
  std::array<std::map<std::size_t, std::size_t>, kNumLabels> length_histogram;
};

CorpusStats compute_stats(const std::vector<MultimediaPost>& posts);

// Table layout with Total/Ins/Con/Pro/Res/Ext columns and Num/Len rows.
std::string render_stats_table(const CorpusStats& stats);
std::string render_length_histograms(const CorpusStats& stats);
std::string stats_to_json(const CorpusStats& stats);

// Raw percent agreement over identical id sets, in [0, 1].
double agreement(const std::map<std::string, DiscourseLabel>& labels_a,
                 const std::map<std::string, DiscourseLabel>& labels_b);

}  // namespace xmdisc
