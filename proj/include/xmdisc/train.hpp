#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xmdisc/classifier.hpp"
#include "xmdisc/metrics.hpp"

namespace xmdisc {

struct TrainConfig {
  int batch_size = 100;
  double learning_rate = 5e-5;
  int max_epochs = 20;
  std::uint64_t seed = 0;
  int patience = 5;
  // Inverse-frequency weights from the training split when unset.
  std::optional<ClassWeights> class_weights;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_weighted_f1 = 0.0;
  std::array<double, kNumLabels> val_per_class_f1{};
};

std::string epoch_record_to_json(const EpochRecord& record);

// Adam with bias correction; state is keyed by parameter position.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void step(const NamedParams& params);

 private:
  double lr_, beta1_, beta2_, epsilon_;
  long t_ = 0;
  std::vector<Mat> m_, v_;
};

struct TrainResult {
  DiscourseModel model;  // parameters from the best validation epoch
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  ClassWeights weights{};
};

// Loss and gradients over one batch; the model's gradients are overwritten.
double batch_loss_and_grad(DiscourseModel& model, const std::vector<const EncodedPost*>& batch,
                           const ClassWeights& weights);

std::vector<DiscourseLabel> predict_labels(const DiscourseModel& model, const std::vector<EncodedPost>& posts);

// Mini-batch training with per-epoch validation; keeps the parameters with
// the best validation weighted F1 and stops after `patience` epochs without
// improvement. Throws TrainingDiverged on a non-finite loss.
TrainResult train(DiscourseModel model, const std::vector<EncodedPost>& train_set,
                  const std::vector<EncodedPost>& validation_set, const TrainConfig& config);

}  // namespace xmdisc
