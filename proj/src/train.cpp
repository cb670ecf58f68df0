#include "xmdisc/train.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "xmdisc/errors.hpp"

namespace xmdisc {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch-size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("lr must be finite and >= 0");
  if (max_epochs < 1) throw ConfigError("max-epochs must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (class_weights) {
    for (double w : *class_weights) {
      if (!(w > 0.0)) throw ConfigError("class weights must be strictly positive");
    }
  }
}

std::string epoch_record_to_json(const EpochRecord& record) {
  nlohmann::ordered_json j;
  j["epoch"] = record.epoch;
  j["train_loss"] = record.train_loss;
  j["val_weighted_f1"] = record.val_weighted_f1;
  auto per_class = nlohmann::ordered_json::object();
  for (auto label : kAllLabels) per_class[std::string(label_name(label))] = record.val_per_class_f1[label_code(label)];
  j["val_per_class_f1"] = per_class;
  return j.dump();
}

void Adam::step(const NamedParams& params) {
  if (m_.empty()) {
    for (const auto& [_, p] : params) {
      m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i].second;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + epsilon_);
  }
}

double batch_loss_and_grad(DiscourseModel& model, const std::vector<const EncodedPost*>& batch,
                           const ClassWeights& weights) {
  model.zero_grad();
  std::vector<DiscourseModel::Trace> traces(batch.size());
  std::vector<Row> logits;
  std::vector<DiscourseLabel> labels;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch[i]->label) throw DataError("post '" + batch[i]->id + "' has no label");
    logits.push_back(model.forward(*batch[i], &traces[i]).logits);
    labels.push_back(*batch[i]->label);
  }
  std::vector<Row> d_logits;
  const double loss = weighted_cross_entropy_logits(logits, labels, weights, &d_logits);
  for (std::size_t i = 0; i < batch.size(); ++i) model.backward(traces[i], d_logits[i]);
  return loss;
}

std::vector<DiscourseLabel> predict_labels(const DiscourseModel& model, const std::vector<EncodedPost>& posts) {
  std::vector<DiscourseLabel> out;
  out.reserve(posts.size());
  for (const auto& post : posts) out.push_back(argmax_label(model.forward(post).probs));
  return out;
}

namespace {

std::vector<DiscourseLabel> truths_of(const std::vector<EncodedPost>& posts) {
  std::vector<DiscourseLabel> out;
  for (const auto& p : posts) {
    if (!p.label) throw DataError("post '" + p.id + "' has no label");
    out.push_back(*p.label);
  }
  return out;
}

}  // namespace

TrainResult train(DiscourseModel model, const std::vector<EncodedPost>& train_set,
                  const std::vector<EncodedPost>& validation_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  if (validation_set.empty()) throw DataError("validation set is empty");

  const auto train_truths = truths_of(train_set);
  const auto val_truths = truths_of(validation_set);

  TrainResult result;
  result.weights = config.class_weights ? *config.class_weights : class_weights(count_labels(train_truths));

  Adam optimizer(config.learning_rate);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  double best_f1 = -1.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    double loss_sum = 0.0;
    double weight_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const EncodedPost*> batch;
      double batch_weight = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&train_set[order[i]]);
        batch_weight += result.weights[label_code(*train_set[order[i]].label)];
      }
      const double loss = batch_loss_and_grad(model, batch, result.weights);
      if (!std::isfinite(loss)) {
        std::string ids;
        for (const auto* p : batch) ids += (ids.empty() ? "" : ",") + p->id;
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", batch [" + ids +
                               "], parameter norm " + std::to_string(model.parameter_norm()));
      }
      loss_sum += loss * batch_weight;
      weight_sum += batch_weight;
      optimizer.step(model.params());
    }

    const EvalReport val = f1_report(predict_labels(model, validation_set), val_truths);
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / weight_sum;
    record.val_weighted_f1 = val.weighted_f1;
    record.val_per_class_f1 = val.per_class_f1;
    result.log.push_back(record);

    if (val.weighted_f1 > best_f1) {
      best_f1 = val.weighted_f1;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  result.model.zero_grad();
  return result;
}

}  // namespace xmdisc
