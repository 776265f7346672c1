#pragma once

#include <optional>
#include <span>
#include <string>

#include "inttower/autograd.hpp"
#include "inttower/model.hpp"

namespace inttower {

struct LossConfig {
  double lambda1 = 0.1;   // contrastive term weight
  double lambda2 = 1e-5;  // L2 weight
  double tau = 1.0;       // InfoNCE temperature

  void validate() const;
};

// Predicted probabilities are clamped to [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-7;

// Mean binary cross-entropy of sigmoid(logits) against labels.
Var ctr_loss(Var logits, std::span<const std::uint8_t> labels);

// InfoNCE over in-batch items: for every positive row u, -log of
// exp(cos(M_u, M_v)/tau) over the sum across all rows v' of the batch.
// Zero when the batch has no positives.
Var cir_loss(Var user_repr, Var item_repr, std::span<const std::uint8_t> labels, const LossConfig& config);

// Sum of squares over the named parameters.
Var l2_penalty(Graph& g, ParamStore& params, std::span<const std::string> names);

struct LossTerms {
  Var total;
  Var ctr;
  Var cir;  // only meaningful when has_cir
  bool has_cir = false;
};

// L = L_ctr + lambda1 * L_cir + lambda2 * ||W||^2 (weight matrices only).
// With both lambdas zero the returned total is the ctr node itself.
LossTerms total_loss(Graph& g, const ForwardResult& fwd, std::span<const std::uint8_t> labels, ParamStore& params,
                     const Model& model, const LossConfig& config);

// Mann-Whitney AUC with ties counted as one half.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);
// Mean clamped cross-entropy of sigmoid(logits); plain-value twin of ctr_loss.
double logloss(std::span<const double> logits, std::span<const std::uint8_t> labels);
// Relative AUC improvement over a base model, in percent.
double relaimpr(double measure_auc, double base_auc);

struct Metrics {
  double auc = 0.0;
  double logloss = 0.0;
  std::optional<double> relaimpr;

  std::string to_json() const;
};

}  // namespace inttower
