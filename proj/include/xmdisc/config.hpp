#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "xmdisc/classifier.hpp"
#include "xmdisc/quality.hpp"
#include "xmdisc/train.hpp"

namespace xmdisc {

// Flat key/value run configuration. Keys mirror the CLI flag names; values
// are kept as text so an echoed file reproduces the run verbatim.
// Precedence when merging is defaults < config file < flags.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<std::pair<std::string, std::string>>& defaults();
  static bool is_known(const std::string& key);

  void set(const std::string& key, const std::string& value);
  // Reads "key = value" lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void merge_text(const std::string& text, const std::string& origin);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  std::string to_text() const;
  void save(const std::filesystem::path& path) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  ModelConfig model_config() const;
  TrainConfig train_config() const;
  QualityThresholds quality_thresholds() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace xmdisc
