#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "inttower/features.hpp"
#include "inttower/model.hpp"
#include "inttower/objectives.hpp"

namespace inttower {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 2048;
  AdamConfig adam;
  std::size_t max_epochs = 10;
  std::size_t patience = 2;
  std::uint64_t seed = 42;
  LossConfig loss;

  void validate() const;
};

// Bias-corrected Adam. Embedding tables only update rows that received a
// gradient in the current step; their moments stay frozen otherwise.
class AdamState {
 public:
  void step(ParamStore& params, const AdamConfig& config);
  std::uint64_t steps() const noexcept { return step_; }

 private:
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  std::uint64_t step_ = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss_ctr = 0.0;
  double loss_cir = 0.0;
  double val_auc = 0.0;
  double val_logloss = 0.0;

  std::string to_json() const;
};

struct TrainResult {
  ParamStore best;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
  std::uint64_t steps = 0;
};

struct Evaluation {
  std::vector<double> logits;
  Metrics metrics;
};

// Eval-mode scoring in mini-batches.
std::vector<double> predict(const Model& model, ParamStore& params, const Dataset& data, std::size_t batch_size = 4096);
Evaluation evaluate(const Model& model, ParamStore& params, const Dataset& data, std::size_t batch_size = 4096);

// Initializes parameters from config.seed, runs shuffled mini-batch epochs
// and keeps the parameters of the best validation-AUC epoch. Stops once
// validation AUC has not improved for `patience` epochs (0 acts like 1).
TrainResult train(const Model& model, const Vocabulary& vocab, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch = {});

// One optimization step on a batch; returns the loss terms' values.
struct StepLoss {
  double total = 0.0;
  double ctr = 0.0;
  double cir = 0.0;
};
StepLoss train_step(const Model& model, ParamStore& params, AdamState& adam, const Batch& batch, const TrainConfig& config,
                    Rng* dropout_rng);

struct GradCheckEntry {
  std::string param;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_grad = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::string model;
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 1e-3;
  bool passed = true;

  std::string to_json() const;
};

// Central finite differences of total_loss against the analytic gradient
// for every scalar of every parameter. Dropout is disabled.
GradCheckReport gradcheck(const Model& model, ParamStore& params, const Batch& batch, const LossConfig& loss,
                          double step = 1e-5, double tolerance = 1e-3);

// Self-contained tiny setup (d=4, widths <= 8, B=4) for the given kind;
// IntTower runs with Light-SE, FE-Block and CIR enabled.
GradCheckReport gradcheck(ModelKind kind, std::uint64_t seed = 1, double tolerance = 1e-3);

}  // namespace inttower
