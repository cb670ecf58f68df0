#include "xmdisc/pipeline.hpp"

#include <nlohmann/json.hpp>

#include "xmdisc/errors.hpp"

namespace xmdisc {

Encoders build_encoders(const RunConfig& config) {
  const ModelConfig model = config.model_config();
  Encoders enc;
  enc.text = make_text_encoder(BackendSpec::parse(config.get("backend-text")), model.hidden_size);
  enc.image = make_image_backbone(BackendSpec::parse(config.get("backend-image")), model.raw_channels);
  if (config.get_bool("unfreeze-backbone")) {
    throw ConfigError("unfreeze-backbone is not supported by image backbone '" + enc.image->identifier() +
                      "'; only the projection layer is trainable");
  }
  if (const auto& source = config.get("caption-source"); source != "precomputed") {
    enc.captioner = make_captioner(BackendSpec::parse(source));
  }
  if (const auto& file = config.get("captions"); !file.empty()) {
    enc.precomputed = std::make_shared<PrecomputedCaptions>(PrecomputedCaptions::load(file));
  }
  return enc;
}

std::string resolve_caption(const Dataset& dataset, const MultimediaPost& post, const Encoders& encoders) {
  if (post.caption) return *post.caption;
  if (encoders.precomputed) {
    try {
      return caption_image(post.id, dataset.image_path(post), *encoders.precomputed);
    } catch (const DataError&) {
      if (!encoders.captioner) throw;
    }
  }
  if (encoders.captioner) return caption_image(post.id, dataset.image_path(post), *encoders.captioner);
  throw DataError("post '" + post.id +
                  "' has no caption; precompute captions with `xmdisc caption --dataset <file> "
                  "--caption-source <captioner> --out captions.jsonl` and pass --captions captions.jsonl, "
                  "or drop the caption modality with --modalities text,image");
}

std::vector<EncodedPost> encode_posts(const Dataset& dataset, const std::vector<std::string>& ids,
                                      const Encoders& encoders, const ModelConfig& model,
                                      std::size_t memory_cap) {
  std::vector<EncodedPost> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const MultimediaPost& post = dataset.find(id);
    EncodedPost e;
    e.id = post.id;
    e.label = post.label;
    if (model.modalities.text) {
      e.text = encode_text(post.text, *encoders.text, model.text_cap);
    }
    if (model.modalities.image) {
      e.image_raw = image_feature_map(dataset.image_path(post), *encoders.image, model.grid, model.hidden_size,
                                      memory_cap);
    }
    if (model.modalities.caption) {
      e.caption = encode_caption(resolve_caption(dataset, post, encoders), *encoders.text, model.caption_cap);
    }
    out.push_back(std::move(e));
  }
  return out;
}

ExperimentResult train_and_evaluate(const Dataset& dataset, const DatasetSplit& split, const RunConfig& config) {
  const ModelConfig model_cfg = config.model_config();
  const TrainConfig train_cfg = config.train_config();
  const Encoders encoders = build_encoders(config);
  const auto cap = static_cast<std::size_t>(config.get_u64("image-memory-cap"));

  const auto train_set = encode_posts(dataset, split.train, encoders, model_cfg, cap);
  const auto val_set = encode_posts(dataset, split.validation, encoders, model_cfg, cap);
  const auto test_set = encode_posts(dataset, split.test, encoders, model_cfg, cap);

  ExperimentResult result;
  result.training = train(DiscourseModel(model_cfg), train_set, val_set, train_cfg);
  result.test_ids = split.test;
  result.test_predictions = predict_labels(result.training.model, test_set);
  std::vector<DiscourseLabel> truths;
  for (const auto& p : test_set) {
    if (!p.label) throw DataError("test post '" + p.id + "' has no label");
    truths.push_back(*p.label);
  }
  if (!truths.empty()) result.test_report = f1_report(result.test_predictions, truths);
  return result;
}

void AblationSpec::validate() const {
  if (modalities.empty()) throw ConfigError("ablation spec has an empty modality subset");
  if (text_cap != 5 && text_cap != 10 && text_cap != 15 && text_cap != 20) {
    throw ConfigError("ablation text cap must be one of 5, 10, 15, 20; got " + std::to_string(text_cap));
  }
}

std::string AblationSpec::name() const {
  return modalities.str() + "/" + std::string(fusion_name(fusion)) + "/L" + std::to_string(text_cap);
}

RunConfig AblationSpec::apply(const RunConfig& base) const {
  validate();
  RunConfig cfg = base;
  cfg.set("modalities", modalities.str());
  cfg.set("fusion", std::string(fusion_name(fusion)));
  cfg.set("text-cap", std::to_string(text_cap));
  return cfg;
}

std::vector<AblationSpec> ablation_grid(const std::string& kind) {
  std::vector<AblationSpec> specs;
  if (kind == "modalities") {
    for (const char* m : {"caption", "image", "text", "text,image,caption"}) {
      specs.push_back({ModalitySet::parse(m), FusionStrategy::MultiheadAtt, kMaxSequenceTokens});
    }
  } else if (kind == "length") {
    for (int cap : {5, 10, 15, 20}) specs.push_back({ModalitySet{}, FusionStrategy::MultiheadAtt, cap});
  } else if (kind == "fusion") {
    for (auto f : {FusionStrategy::ConcatFuse, FusionStrategy::Attention, FusionStrategy::CoAttention,
                   FusionStrategy::MultiheadAtt}) {
      specs.push_back({ModalitySet{}, f, kMaxSequenceTokens});
    }
  } else {
    throw ConfigError("unknown ablation grid '" + kind + "' (expected modalities, length or fusion)");
  }
  return specs;
}

std::vector<AblationRow> run_ablation(const std::vector<AblationSpec>& specs, const Dataset& dataset,
                                      const DatasetSplit& split, const RunConfig& config) {
  for (const auto& spec : specs) spec.validate();
  std::vector<AblationRow> rows;
  for (const auto& spec : specs) {
    rows.push_back({spec, train_and_evaluate(dataset, split, spec.apply(config)).test_report});
  }
  return rows;
}

std::string ablation_to_json(const std::vector<AblationRow>& rows) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json r;
    r["spec"] = {{"modalities", row.spec.modalities.str()},
                 {"fusion", std::string(fusion_name(row.spec.fusion))},
                 {"text_cap", row.spec.text_cap}};
    r["report"] = nlohmann::ordered_json::parse(report_to_json(row.report));
    out.push_back(r);
  }
  return out.dump(2) + "\n";
}

std::string render_ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = render_report_header();
  for (const auto& row : rows) out += render_report_row(row.spec.name(), row.report);
  return out;
}

}  // namespace xmdisc
