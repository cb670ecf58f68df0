#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "xmdisc/config.hpp"

namespace xmdisc::cli {

// Options shared by every subcommand.
struct Common {
  std::string config_file;
  std::map<std::string, std::string> overrides;  // config keys given as flags
  std::string out = "runs";
  std::string run_name;

  RunConfig effective() const;
};

int cmd_stats(const Common& common, const std::string& dataset);
int cmd_split(const Common& common, const std::string& dataset, const std::string& out_file);
int cmd_caption(const Common& common, const std::string& dataset, const std::string& out_file);
int cmd_train(const Common& common, const std::string& dataset, const std::string& split);
int cmd_eval(const Common& common, const std::string& checkpoint, const std::string& dataset,
             const std::string& split, const std::string& part, const std::string& compare);
int cmd_ablate(const Common& common, const std::string& dataset, const std::string& split,
               const std::string& grid);
int cmd_visualize(const Common& common, const std::string& checkpoint, const std::string& dataset,
                  const std::string& post_id, bool per_head);
int cmd_screen(const Common& common, const std::string& dataset);
int cmd_agree(const std::string& file_a, const std::string& file_b);

}  // namespace xmdisc::cli
