#include <exception>
#include <functional>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "commands.hpp"
#include "xmdisc/errors.hpp"

using namespace xmdisc;

namespace {

// Registers --config, --out, --run-name and one flag per config key, except
// keys whose flag name the subcommand already uses for something else.
void add_common(CLI::App* sub, cli::Common& common, std::map<std::string, std::string>& flag_values,
                std::vector<std::pair<std::string, CLI::Option*>>& flag_options,
                const std::set<std::string>& taken = {}) {
  sub->add_option("--config", common.config_file, "key = value config file")->check(CLI::ExistingFile);
  sub->add_option("--out", common.out, "parent directory for run outputs")->capture_default_str();
  sub->add_option("--run-name", common.run_name, "suffix for the run directory name");
  for (const auto& [key, def] : RunConfig::defaults()) {
    if (taken.count(key)) continue;
    auto* opt = sub->add_option("--" + key, flag_values[key], "default: " + (def.empty() ? "(none)" : def));
    opt->group("Config keys");
    flag_options.emplace_back(key, opt);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xmdisc: cross-modality discourse classification of image-text posts"};
  app.require_subcommand(1);

  cli::Common common;
  std::map<std::string, std::string> flag_values;
  std::vector<std::pair<std::string, CLI::Option*>> flag_options;
  std::function<int()> action;

  std::string dataset, split, out_file, checkpoint, part = "test", compare, grid, post_id, file_a, file_b;
  bool per_head = false;

  auto* stats = app.add_subcommand("stats", "corpus statistics and length histograms");
  stats->add_option("--dataset", dataset, "dataset JSONL file")->required();
  add_common(stats, common, flag_values, flag_options);
  stats->callback([&] { action = [&] { return cli::cmd_stats(common, dataset); }; });

  auto* split_cmd = app.add_subcommand("split", "seeded 80/10/10 train/validation/test split");
  split_cmd->add_option("--dataset", dataset)->required();
  split_cmd->add_option("--split-out,-o", out_file, "split file to write")->required();
  add_common(split_cmd, common, flag_values, flag_options);
  split_cmd->callback([&] { action = [&] { return cli::cmd_split(common, dataset, out_file); }; });

  auto* caption = app.add_subcommand("caption", "precompute image captions");
  caption->add_option("--dataset", dataset)->required();
  caption->add_option("--captions-out,-o", out_file, "caption JSONL file to write")->required();
  add_common(caption, common, flag_values, flag_options);
  caption->callback([&] { action = [&] { return cli::cmd_caption(common, dataset, out_file); }; });

  auto* train = app.add_subcommand("train", "train a model and save the best checkpoint");
  train->add_option("--dataset", dataset)->required();
  train->add_option("--split", split, "split file from `xmdisc split`")->required();
  add_common(train, common, flag_values, flag_options);
  train->callback([&] { action = [&] { return cli::cmd_train(common, dataset, split); }; });

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a split part");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--dataset", dataset)->required();
  eval->add_option("--split", split)->required();
  eval->add_option("--part", part, "train, validation or test")->capture_default_str();
  eval->add_option("--compare", compare, "predictions JSONL of another system for a significance test");
  add_common(eval, common, flag_values, flag_options);
  eval->callback([&] {
    action = [&] { return cli::cmd_eval(common, checkpoint, dataset, split, part, compare); };
  });

  auto* ablate = app.add_subcommand("ablate", "train and score one model per ablation spec");
  ablate->add_option("--dataset", dataset)->required();
  ablate->add_option("--split", split)->required();
  ablate->add_option("--grid", grid, "modalities, length or fusion")
      ->required()
      ->check(CLI::IsMember({"modalities", "length", "fusion"}));
  // the region grid size can still be set through --config
  add_common(ablate, common, flag_values, flag_options, {"grid"});
  ablate->callback([&] { action = [&] { return cli::cmd_ablate(common, dataset, split, grid); }; });

  auto* visualize = app.add_subcommand("visualize", "export image attention heatmaps for one post");
  visualize->add_option("--checkpoint", checkpoint)->required();
  visualize->add_option("--dataset", dataset)->required();
  visualize->add_option("--id", post_id, "post id")->required();
  visualize->add_flag("--per-head", per_head, "also write one grid per attention head");
  add_common(visualize, common, flag_values, flag_options);
  visualize->callback([&] {
    action = [&] { return cli::cmd_visualize(common, checkpoint, dataset, post_id, per_head); };
  });

  auto* screen = app.add_subcommand("screen", "flag portrait, low-quality and OCR-subtitle pairs");
  screen->add_option("--dataset", dataset)->required();
  add_common(screen, common, flag_values, flag_options);
  screen->callback([&] { action = [&] { return cli::cmd_screen(common, dataset); }; });

  auto* agree = app.add_subcommand("agree", "raw agreement between two label files");
  agree->add_option("a", file_a, "first {id, label} JSONL file")->required();
  agree->add_option("b", file_b, "second {id, label} JSONL file")->required();
  agree->callback([&] { action = [&] { return cli::cmd_agree(file_a, file_b); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  for (const auto& [key, opt] : flag_options) {
    if (opt->count() > 0) common.overrides[key] = flag_values[key];
  }

  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}
