#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "inttower/trainer.hpp"

namespace inttower {

namespace {

double loss_value(const Model& model, ParamStore& params, const Batch& batch, const LossConfig& loss) {
  Graph g(false);
  ForwardResult fwd = model.forward(g, params, batch, Mode::kEval);
  return total_loss(g, fwd, batch.labels, params, model, loss).total.value().item();
}

}  // namespace

GradCheckReport gradcheck(const Model& model, ParamStore& params, const Batch& batch, const LossConfig& loss, double step,
                          double tolerance) {
  GradCheckReport report;
  report.model = to_string(model.config().kind);
  report.tolerance = tolerance;

  params.zero_grad();
  {
    Graph g;
    ForwardResult fwd = model.forward(g, params, batch, Mode::kEval);
    LossTerms terms = total_loss(g, fwd, batch.labels, params, model, loss);
    g.backward(terms.total);
  }
  // The denominator floor keeps roundoff on vanishing gradients from
  // reading as a large relative error.
  constexpr double kFloor = 1e-6;
  for (Parameter& p : params.all()) {
    GradCheckEntry entry;
    entry.param = p.name;
    const Tensor analytic = p.grad;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = loss_value(model, params, batch, loss);
      p.value[i] = saved - step;
      const double down = loss_value(model, params, batch, loss);
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kFloor});
      entry.max_rel_error = std::max(entry.max_rel_error, err);
      entry.max_abs_grad = std::max(entry.max_abs_grad, std::abs(a));
      ++entry.checked;
    }
    entry.passed = entry.max_rel_error < tolerance;
    report.passed = report.passed && entry.passed;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(entry);
  }
  params.zero_grad();
  return report;
}

GradCheckReport gradcheck(ModelKind kind, std::uint64_t seed, double tolerance) {
  FeatureSchema schema;
  schema.user_fields = {"u_id", "u_attr"};
  schema.item_fields = {"i_id", "i_attr"};
  schema.embedding_dim = 4;

  Vocabulary vocab(schema);
  for (std::size_t f = 0; f < schema.total_fields(); ++f)
    for (int v = 0; v < 3; ++v) vocab.add(f, std::to_string(v));

  ModelConfig cfg;
  cfg.kind = kind;
  cfg.tower.widths = {8, 6, 5};
  cfg.tower.dropout_rate = 0.0;
  cfg.head_dim = 3;
  cfg.flags = ArchFlags{true, true, true, false};
  Model model(schema, cfg);

  ParamStore params;
  model.init(params, vocab, seed);

  Rng rng(seed * 7919 + 3);
  // Zero biases put dead-ReLU rows exactly on a kink (or a zero vector
  // into the normalization); nudge them off it.
  for (Parameter& p : params.all())
    if (p.role == ParamRole::kBias)
      for (double& v : p.value.values()) v = rng.uniform(-0.2, 0.2);
  Batch batch;
  batch.size = 4;
  batch.user_fields = 2;
  batch.item_fields = 2;
  for (std::size_t i = 0; i < batch.size * 2; ++i) {
    batch.user_ids.push_back(static_cast<std::uint32_t>(rng.index(4)));
    batch.item_ids.push_back(static_cast<std::uint32_t>(rng.index(4)));
  }
  batch.labels = {1, 0, 1, 0};

  LossConfig loss{0.5, 1e-2, 0.5};
  return gradcheck(model, params, batch, loss, 1e-5, tolerance);
}

std::string GradCheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["passed"] = passed;
  j["tolerance"] = tolerance;
  j["max_rel_error"] = max_rel_error;
  auto& arr = j["params"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    arr.push_back({{"name", e.param}, {"checked", e.checked}, {"max_rel_error", e.max_rel_error},
                   {"max_abs_grad", e.max_abs_grad}, {"passed", e.passed}});
  }
  return j.dump();
}

}  // namespace inttower
