#include "inttower/trainer.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

#include "inttower/errors.hpp"

namespace inttower {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("adam eps must be positive");
  loss.validate();
}

void AdamState::step(ParamStore& params, const AdamConfig& config) {
  auto& all = params.all();
  if (first_.empty()) {
    for (const Parameter& p : all) {
      first_.emplace_back(p.value.shape());
      second_.emplace_back(p.value.shape());
    }
  }
  if (first_.size() != all.size()) throw ContractError("optimizer state does not match the parameter set");
  ++step_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  const double b1 = config.beta1, b2 = config.beta2, lr = config.learning_rate, eps = config.eps;

  auto update = [&](double* w, const double* g, double* m, double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  };

  for (std::size_t k = 0; k < all.size(); ++k) {
    Parameter& p = all[k];
    if (p.grad.shape() != p.value.shape() || first_[k].shape() != p.value.shape()) {
      throw ContractError("gradient/moment shape mismatch for " + p.name);
    }
    if (p.role == ParamRole::kEmbedding) {
      const std::size_t d = p.value.cols();
      for (std::uint32_t r : p.touched_rows) {
        const std::size_t off = static_cast<std::size_t>(r) * d;
        update(p.value.data() + off, p.grad.data() + off, first_[k].data() + off, second_[k].data() + off, d);
      }
    } else {
      update(p.value.data(), p.grad.data(), first_[k].data(), second_[k].data(), p.value.size());
    }
  }
}

std::string EpochLog::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["loss_ctr"] = loss_ctr;
  j["loss_cir"] = loss_cir;
  j["val_auc"] = val_auc;
  j["val_logloss"] = val_logloss;
  return j.dump();
}

std::vector<double> predict(const Model& model, ParamStore& params, const Dataset& data, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(data.size());
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    rows.clear();
    for (std::size_t r = start; r < end; ++r) rows.push_back(r);
    Batch b = data.batch(rows);
    Graph g(false);
    ForwardResult fwd = model.forward(g, params, b, Mode::kEval);
    const Tensor& z = fwd.logits.value();
    out.insert(out.end(), z.values().begin(), z.values().end());
  }
  return out;
}

Evaluation evaluate(const Model& model, ParamStore& params, const Dataset& data, std::size_t batch_size) {
  Evaluation ev;
  ev.logits = predict(model, params, data, batch_size);
  ev.metrics.auc = auc(ev.logits, data.labels);
  ev.metrics.logloss = logloss(ev.logits, data.labels);
  return ev;
}

StepLoss train_step(const Model& model, ParamStore& params, AdamState& adam, const Batch& batch, const TrainConfig& config,
                    Rng* dropout_rng) {
  params.zero_grad();
  Graph g;
  ForwardResult fwd = model.forward(g, params, batch, Mode::kTrain, dropout_rng);
  LossTerms terms = total_loss(g, fwd, batch.labels, params, model, config.loss);
  StepLoss out;
  out.total = terms.total.value().item();
  out.ctr = terms.ctr.value().item();
  out.cir = terms.has_cir ? terms.cir.value().item() : 0.0;
  if (!std::isfinite(out.total)) {
    throw DivergenceError("non-finite loss at optimizer step " + std::to_string(adam.steps() + 1));
  }
  g.backward(terms.total);
  adam.step(params, config.adam);
  return out;
}

TrainResult train(const Model& model, const Vocabulary& vocab, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (train_set.size() == 0 || val_set.size() == 0) throw DataError("training and validation sets must be non-empty");

  ParamStore params;
  model.init(params, vocab, config.seed);
  AdamState adam;
  Rng shuffle_rng(config.seed ^ 0x5eed5eedULL);
  Rng dropout_rng(config.seed + 1);

  TrainResult result;
  result.best = params;
  result.best_val_auc = -1.0;
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double ctr_sum = 0.0, cir_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Batch b = train_set.batch(std::span<const std::size_t>(order.data() + start, end - start));
      StepLoss loss;
      try {
        loss = train_step(model, params, adam, b, config, &dropout_rng);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
      }
      ctr_sum += loss.ctr;
      cir_sum += loss.cir;
      ++batches;
    }
    Evaluation val = evaluate(model, params, val_set);
    EpochLog entry{epoch, ctr_sum / static_cast<double>(batches), cir_sum / static_cast<double>(batches), val.metrics.auc,
                   val.metrics.logloss};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (val.metrics.auc > result.best_val_auc) {
      result.best_val_auc = val.metrics.auc;
      result.best_epoch = epoch;
      result.best = params;
      since_best = 0;
    } else if (++since_best >= std::max<std::size_t>(config.patience, 1)) {
      break;
    }
  }
  result.steps = adam.steps();
  for (Parameter& p : result.best.all()) p.zero_grad();
  return result;
}

}  // namespace inttower
