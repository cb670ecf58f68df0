#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xmdisc/config.hpp"
#include "xmdisc/corpus.hpp"
#include "xmdisc/encoders.hpp"
#include "xmdisc/metrics.hpp"
#include "xmdisc/train.hpp"

namespace xmdisc {

// Frozen feature extractors and caption resolution for one run.
struct Encoders {
  std::shared_ptr<const TextEncoder> text;
  std::shared_ptr<const ImageBackbone> image;
  std::shared_ptr<const CaptionSource> captioner;   // null in precomputed mode
  std::shared_ptr<const PrecomputedCaptions> precomputed;  // null if no file configured
};

Encoders build_encoders(const RunConfig& config);

// Caption priority: the dataset's own caption field, then the precomputed
// caption file, then the configured captioner.
std::string resolve_caption(const Dataset& dataset, const MultimediaPost& post, const Encoders& encoders);

std::vector<EncodedPost> encode_posts(const Dataset& dataset, const std::vector<std::string>& ids,
                                      const Encoders& encoders, const ModelConfig& model,
                                      std::size_t memory_cap);

struct ExperimentResult {
  TrainResult training;
  std::vector<std::string> test_ids;
  std::vector<DiscourseLabel> test_predictions;
  EvalReport test_report;
};

// Encode, train with validation-based model selection, and score the test split.
ExperimentResult train_and_evaluate(const Dataset& dataset, const DatasetSplit& split, const RunConfig& config);

struct AblationSpec {
  ModalitySet modalities;
  FusionStrategy fusion = FusionStrategy::MultiheadAtt;
  int text_cap = kMaxSequenceTokens;

  void validate() const;
  std::string name() const;
  // Copy of `base` with this spec's modality, fusion and text-cap keys set.
  RunConfig apply(const RunConfig& base) const;
};

// "modalities": caption-only, image-only, text-only, full.
// "length": full model with text capped at 5, 10, 15, 20.
// "fusion": concat, attention, coattention, multihead with all modalities.
std::vector<AblationSpec> ablation_grid(const std::string& kind);

struct AblationRow {
  AblationSpec spec;
  EvalReport report;
};

// One independently trained model per spec, each scored on the test split.
std::vector<AblationRow> run_ablation(const std::vector<AblationSpec>& specs, const Dataset& dataset,
                                      const DatasetSplit& split, const RunConfig& config);

std::string ablation_to_json(const std::vector<AblationRow>& rows);
std::string render_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace xmdisc
