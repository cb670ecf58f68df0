#include "commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xmdisc/checkpoint.hpp"
#include "xmdisc/corpus.hpp"
#include "xmdisc/errors.hpp"
#include "xmdisc/heatmap.hpp"
#include "xmdisc/image_io.hpp"
#include "xmdisc/pipeline.hpp"
#include "xmdisc/quality.hpp"

namespace fs = std::filesystem;

namespace xmdisc::cli {
namespace {

// Keys that define the trained network and its inputs. An evaluation must
// use the values stored in the checkpoint.
const std::set<std::string> kModelKeys = {"heads",     "hidden-size", "grid",         "raw-channels",
                                          "text-cap",  "caption-cap", "fusion",       "modalities",
                                          "backend-text", "backend-image", "seed"};

fs::path make_run_dir(const Common& common, const std::string& command) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  std::string base = std::string(stamp) + "-" + command;
  if (!common.run_name.empty()) base += "-" + common.run_name;
  fs::path dir = fs::path(common.out) / base;
  for (int k = 1; fs::exists(dir); ++k) dir = fs::path(common.out) / (base + "-" + std::to_string(k));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create run directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// Reads {"id", "label"} records, one per line. Dataset files qualify.
std::map<std::string, DiscourseLabel> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file: " + path.string());
  std::map<std::string, DiscourseLabel> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto name = j.at("label").get<std::string>();
      const auto label = parse_label(name);
      if (!label) {
        throw DataError(path.string() + ": unknown label '" + name + "' at line " + std::to_string(n));
      }
      out[j.at("id").get<std::string>()] = *label;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": malformed record at line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

const std::vector<std::string>& split_part(const DatasetSplit& split, const std::string& part) {
  if (part == "test") return split.test;
  if (part == "validation") return split.validation;
  if (part == "train") return split.train;
  throw ConfigError("unknown split part '" + part + "' (expected train, validation or test)");
}

// Checkpoint config with run-level overrides; model-defining keys must agree.
RunConfig checkpoint_config(const Common& common, const RunConfig& stored) {
  RunConfig cfg = stored;
  RunConfig requested;
  if (!common.config_file.empty()) requested.load_file(common.config_file);
  for (const auto& [key, value] : common.overrides) requested.set(key, value);
  for (const auto& [key, value] : requested.values()) {
    if (value == RunConfig().get(key) && !common.overrides.count(key)) continue;
    if (kModelKeys.count(key)) {
      if (value != stored.get(key)) {
        throw ConfigError("'" + key + "' is fixed by the checkpoint (" + stored.get(key) + "), got " + value);
      }
      continue;
    }
    cfg.set(key, value);
  }
  return cfg;
}

void print_config_echo(const fs::path& run_dir, const RunConfig& cfg) {
  cfg.save(run_dir / "config.txt");
  std::cout << "run directory: " << run_dir.string() << "\n";
}

}  // namespace

RunConfig Common::effective() const {
  RunConfig cfg;
  if (!config_file.empty()) cfg.load_file(config_file);
  for (const auto& [key, value] : overrides) cfg.set(key, value);
  return cfg;
}

int cmd_stats(const Common& common, const std::string& dataset) {
  const Dataset data = load_dataset(dataset, true);
  const CorpusStats stats = compute_stats(data.posts);
  std::cout << render_stats_table(stats) << "\n" << render_length_histograms(stats);
  const fs::path run = make_run_dir(common, "stats");
  write_file(run / "stats.json", stats_to_json(stats));
  write_file(run / "stats.txt", render_stats_table(stats));
  print_config_echo(run, common.effective());
  return 0;
}

int cmd_split(const Common& common, const std::string& dataset, const std::string& out_file) {
  const RunConfig cfg = common.effective();
  const Dataset data = load_dataset(dataset, false);
  const DatasetSplit split = make_split(data.posts, cfg.get_u64("seed"));
  save_split(split, out_file);
  std::cout << "train " << split.train.size() << ", validation " << split.validation.size() << ", test "
            << split.test.size() << " (seed " << split.seed << ") -> " << out_file << "\n";
  return 0;
}

int cmd_caption(const Common& common, const std::string& dataset, const std::string& out_file) {
  const RunConfig cfg = common.effective();
  const Dataset data = load_dataset(dataset, false);
  const auto& source = cfg.get("caption-source");
  if (source == "precomputed") {
    throw ConfigError("caption needs a captioner; pass --caption-source stub:<seed> or a registered captioner id");
  }
  const auto captioner = make_captioner(BackendSpec::parse(source));
  std::vector<std::pair<std::string, std::string>> captions;
  for (const auto& post : data.posts) {
    captions.emplace_back(post.id, caption_image(post.id, data.image_path(post), *captioner));
  }
  write_captions(out_file, captions);
  std::cout << "captioned " << captions.size() << " posts -> " << out_file << "\n";
  return 0;
}

int cmd_train(const Common& common, const std::string& dataset, const std::string& split_file) {
  const RunConfig cfg = common.effective();
  const Dataset data = load_dataset(dataset, true);
  const DatasetSplit split = load_split(split_file);
  const fs::path run = make_run_dir(common, "train");
  print_config_echo(run, cfg);

  const ExperimentResult result = train_and_evaluate(data, split, cfg);
  std::ofstream log(run / "train_log.jsonl", std::ios::binary);
  for (const auto& rec : result.training.log) {
    log << epoch_record_to_json(rec) << "\n";
    std::printf("epoch %3d  loss %.6f  val weighted F1 %.2f\n", rec.epoch, rec.train_loss, rec.val_weighted_f1);
  }
  DiscourseModel model = result.training.model;
  save_checkpoint(run / "checkpoint", model, cfg, split.seed, result.training.best_epoch, result.training.weights);
  if (result.test_report.n > 0) {
    write_file(run / "test_report.json", report_to_json(result.test_report));
    std::cout << render_report_header() << render_report_row("test", result.test_report);
  }
  std::cout << "best epoch " << result.training.best_epoch << ", checkpoint: " << (run / "checkpoint").string()
            << "\n";
  return 0;
}

int cmd_eval(const Common& common, const std::string& checkpoint, const std::string& dataset,
             const std::string& split_file, const std::string& part, const std::string& compare) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  const RunConfig cfg = checkpoint_config(common, ckpt.config);
  const Dataset data = load_dataset(dataset, true);
  const DatasetSplit split = load_split(split_file);
  const auto& ids = split_part(split, part);
  if (ids.empty()) throw DataError("split part '" + part + "' is empty");

  const auto posts = encode_posts(data, ids, build_encoders(cfg), ckpt.model.config(),
                                  static_cast<std::size_t>(cfg.get_u64("image-memory-cap")));
  const auto preds = predict_labels(ckpt.model, posts);
  std::vector<DiscourseLabel> truths;
  for (const auto& p : posts) truths.push_back(*p.label);
  EvalReport report = f1_report(preds, truths);

  if (!compare.empty()) {
    const auto other = read_labels(compare);
    std::vector<DiscourseLabel> other_preds;
    for (const auto& id : ids) {
      const auto it = other.find(id);
      if (it == other.end()) throw DataError("comparison file has no prediction for post '" + id + "'");
      other_preds.push_back(it->second);
    }
    report.significance = Significance{
        fs::path(compare).filename().string(),
        significance(preds, other_preds, truths, cfg.get_int("significance-trials"), cfg.get_u64("seed"))};
  }

  const fs::path run = make_run_dir(common, "eval");
  print_config_echo(run, cfg);
  write_file(run / "report.json", report_to_json(report));
  const std::string table = render_report_header() + render_report_row(part, report);
  write_file(run / "report.txt", table);
  std::ofstream pred_out(run / "predictions.jsonl", std::ios::binary);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    pred_out << nlohmann::ordered_json{{"id", ids[i]}, {"label", std::string(label_name(preds[i]))}}.dump()
             << "\n";
  }
  std::cout << table;
  if (report.significance) std::cout << "p-value vs " << report.significance->baseline << ": "
                                     << report.significance->p_value << "\n";
  return 0;
}

int cmd_ablate(const Common& common, const std::string& dataset, const std::string& split_file,
               const std::string& grid) {
  const RunConfig cfg = common.effective();
  const auto specs = ablation_grid(grid);
  const Dataset data = load_dataset(dataset, true);
  const DatasetSplit split = load_split(split_file);
  const fs::path run = make_run_dir(common, "ablate-" + grid);
  print_config_echo(run, cfg);
  const auto rows = run_ablation(specs, data, split, cfg);
  write_file(run / "ablation.json", ablation_to_json(rows));
  write_file(run / "ablation.txt", render_ablation_table(rows));
  std::cout << render_ablation_table(rows);
  return 0;
}

int cmd_visualize(const Common& common, const std::string& checkpoint, const std::string& dataset,
                  const std::string& post_id, bool per_head) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  if (ckpt.model.config().fusion == FusionStrategy::ConcatFuse) {
    throw ConfigError("checkpoint uses concat fusion, which has no attention weights to visualize");
  }
  if (!ckpt.model.config().modalities.image) {
    throw ConfigError("checkpoint was trained without the image modality; no attention weights over regions");
  }
  const RunConfig cfg = checkpoint_config(common, ckpt.config);
  const Dataset data = load_dataset(dataset, false);
  const MultimediaPost& post = data.find(post_id);
  const auto encoded = encode_posts(data, {post_id}, build_encoders(cfg), ckpt.model.config(),
                                    static_cast<std::size_t>(cfg.get_u64("image-memory-cap")));
  const auto forward = ckpt.model.forward(encoded.front());

  const fs::path run = make_run_dir(common, "visualize");
  print_config_echo(run, cfg);
  const auto files = export_heatmap(post, data.image_path(post), forward.fusion, run, per_head);
  std::ofstream dump(run / "attention.jsonl", std::ios::binary);
  write_attention_dump(dump, post.id, forward.fusion);
  for (const auto& g : files.grids) std::cout << g.string() << "\n";
  std::cout << files.overlay.string() << "\n";
  std::cout << "predicted: " << label_name(argmax_label(forward.probs)) << "\n";
  return 0;
}

int cmd_screen(const Common& common, const std::string& dataset) {
  const RunConfig cfg = common.effective();
  const Dataset data = load_dataset(dataset, false);
  const QualityThresholds thresholds = cfg.quality_thresholds();
  const fs::path run = make_run_dir(common, "screen");
  print_config_echo(run, cfg);
  std::ofstream out(run / "screen.jsonl", std::ios::binary);
  std::map<std::string, std::size_t> counts;
  for (const auto& post : data.posts) {
    const auto verdict = quality_screen(data, post, thresholds);
    out << verdict_to_json(verdict) << "\n";
    for (auto flag : verdict.flags) ++counts[std::string(quality_flag_name(flag))];
  }
  std::cout << "screened " << data.posts.size() << " posts\n";
  for (const auto& [flag, n] : counts) std::cout << "  " << flag << ": " << n << "\n";
  return 0;
}

int cmd_agree(const std::string& file_a, const std::string& file_b) {
  const double a = agreement(read_labels(file_a), read_labels(file_b));
  std::printf("agreement %.4f\n", a);
  return 0;
}

}  // namespace xmdisc::cli
