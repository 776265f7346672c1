#include "inttower/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "inttower/errors.hpp"

namespace inttower {

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("lambda1 and lambda2 must be non-negative");
}

namespace {

void check_labels(std::span<const std::uint8_t> labels, std::size_t expected) {
  if (labels.size() != expected) {
    throw ShapeError(std::to_string(labels.size()) + " labels for " + std::to_string(expected) + " predictions");
  }
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 1) throw DataError("label " + std::to_string(labels[i]) + " at position " + std::to_string(i));
}

double clamped_sigmoid(double z) {
  const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

}  // namespace

Var ctr_loss(Var logits, std::span<const std::uint8_t> labels) {
  const Tensor& z = logits.value();
  if (z.size() == 0) throw ContractError("ctr_loss on an empty batch");
  check_labels(labels, z.size());
  const double n = static_cast<double>(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double p = clamped_sigmoid(z[i]);
    total += labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  std::vector<std::uint8_t> y(labels.begin(), labels.end());
  return logits.graph->push(Tensor::scalar(-total / n), {logits}, [logits, n, y = std::move(y)](Graph& g, const Tensor& go) {
    if (!g.requires_grad(logits)) return;
    const Tensor& z = g.value(logits);
    Tensor& gz = g.grad_buffer(logits);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double p = clamped_sigmoid(z[i]);
      // The clamp is flat outside its range.
      if (p <= kProbClamp || p >= 1.0 - kProbClamp) continue;
      gz[i] += go[0] * (p - static_cast<double>(y[i])) / n;
    }
  });
}

Var cir_loss(Var user_repr, Var item_repr, std::span<const std::uint8_t> labels, const LossConfig& config) {
  config.validate();
  const Tensor& mu = user_repr.value();
  const Tensor& mv = item_repr.value();
  if (mu.rank() != 2 || mu.shape() != mv.shape()) {
    throw ShapeError("cir_loss: " + shape_str(mu.shape()) + " vs " + shape_str(mv.shape()));
  }
  check_labels(labels, mu.rows());
  Graph& g = *user_repr.graph;
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) return g.constant(Tensor::scalar(0.0));

  Var u = ag::l2_normalize(user_repr);
  Var v = ag::l2_normalize(item_repr);
  Var sims = ag::scale(ag::matmul(u, ag::transpose(v)), 1.0 / config.tau);
  Var log_ratio = ag::diag(ag::log_softmax(sims));
  Tensor weights({mu.rows(), 1});
  for (std::size_t i = 0; i < labels.size(); ++i) weights[i] = labels[i] ? 1.0 / static_cast<double>(positives) : 0.0;
  return ag::scale(ag::sum(ag::mul(log_ratio, g.constant(std::move(weights)))), -1.0);
}

Var l2_penalty(Graph& g, ParamStore& params, std::span<const std::string> names) {
  Var total = g.constant(Tensor::scalar(0.0));
  bool first = true;
  for (const auto& name : names) {
    Var sq = ag::sum_squares(g.param(params.get(name)));
    total = first ? sq : ag::add(total, sq);
    first = false;
  }
  return total;
}

LossTerms total_loss(Graph& g, const ForwardResult& fwd, std::span<const std::uint8_t> labels, ParamStore& params,
                     const Model& model, const LossConfig& config) {
  config.validate();
  LossTerms terms;
  terms.ctr = ctr_loss(fwd.logits, labels);
  terms.total = terms.ctr;
  if (model.config().flags.use_cir && fwd.has_repr) {
    terms.cir = cir_loss(fwd.user_repr, fwd.item_repr, labels, config);
    terms.has_cir = true;
    if (config.lambda1 != 0.0) terms.total = ag::add(terms.total, ag::scale(terms.cir, config.lambda1));
  }
  if (config.lambda2 != 0.0) {
    const auto names = model.weight_names(params);
    if (!names.empty()) terms.total = ag::add(terms.total, ag::scale(l2_penalty(g, params, names), config.lambda2));
  }
  return terms;
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_labels(labels, scores.size());
  const auto n = scores.size();
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw MetricError("AUC needs at least one positive and one negative");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]]) rank_sum += avg_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double logloss(std::span<const double> logits, std::span<const std::uint8_t> labels) {
  check_labels(labels, logits.size());
  if (logits.empty()) throw MetricError("logloss of zero predictions");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = clamped_sigmoid(logits[i]);
    total += labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return -total / static_cast<double>(logits.size());
}

double relaimpr(double measure_auc, double base_auc) {
  if (base_auc == 0.5) throw MetricError("division by zero: base AUC is 0.5");
  return ((measure_auc - 0.5) / (base_auc - 0.5) - 1.0) * 100.0;
}

std::string Metrics::to_json() const {
  nlohmann::ordered_json j;
  j["auc"] = auc;
  j["logloss"] = logloss;
  j["relaimpr_vs_base"] = relaimpr ? nlohmann::ordered_json(*relaimpr) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

}  // namespace inttower
