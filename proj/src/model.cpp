#include "inttower/model.hpp"

#include <algorithm>
#include <cmath>

#include "inttower/errors.hpp"

namespace inttower {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kIntTower: return "inttower";
    case ModelKind::kTwoTower: return "twotower";
    case ModelKind::kSingleTower: return "singletower";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "inttower") return ModelKind::kIntTower;
  if (name == "twotower") return ModelKind::kTwoTower;
  if (name == "singletower") return ModelKind::kSingleTower;
  throw ConfigError("unknown model '" + name + "' (expected inttower, twotower or singletower)");
}

Var light_se_weights(Var embeddings, Var weight, Var bias, std::size_t embedding_dim) {
  const std::size_t width = embeddings.value().cols();
  if (embedding_dim == 0 || width % embedding_dim != 0) {
    throw ShapeError("light_se: width " + std::to_string(width) + " not divisible by d=" + std::to_string(embedding_dim));
  }
  Var z = ag::segment_mean(embeddings, embedding_dim);
  return ag::softmax(ag::add_bias(ag::matmul(z, weight), bias));
}

Var light_se(Var embeddings, Var weight, Var bias, std::size_t embedding_dim) {
  Var k = light_se_weights(embeddings, weight, bias, embedding_dim);
  return ag::segment_scale(embeddings, k, embedding_dim);
}

std::vector<Var> tower_forward(Var x, const std::vector<DenseLayer>& layers, double dropout_rate, Rng* rng,
                               bool relu_output) {
  std::vector<Var> activations;
  activations.reserve(layers.size());
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& layer = layers[i];
    if (h.value().cols() != layer.weight.value().rows()) {
      throw ShapeError("tower layer expects width " + std::to_string(layer.weight.value().rows()) + ", got " +
                       shape_str(h.value().shape()));
    }
    h = ag::add_bias(ag::matmul(h, layer.weight), layer.bias);
    const bool activated = i + 1 < layers.size() || relu_output;
    if (activated) h = ag::relu(h);
    if (activated && rng != nullptr && dropout_rate > 0.0) {
      Tensor mask(h.value().shape());
      const double keep = 1.0 - dropout_rate;
      for (double& v : mask.values()) v = rng->uniform() < keep ? 1.0 / keep : 0.0;
      h = ag::mul(h, h.graph->constant(std::move(mask)));
    }
    activations.push_back(h);
  }
  return activations;
}

Var project_heads(Var h, const DenseLayer& proj, std::size_t head_dim) {
  if (h.value().cols() != proj.weight.value().rows()) {
    throw ShapeError("head projection expects width " + std::to_string(proj.weight.value().rows()) + ", got " +
                     shape_str(h.value().shape()));
  }
  Var m = ag::add_bias(ag::matmul(h, proj.weight), proj.bias);
  return ag::l2_normalize(m, head_dim);
}

Var maxsim_score(Var user_heads, Var item_heads, std::size_t head_dim) {
  return ag::maxsim(user_heads, item_heads, head_dim);
}

namespace {

std::string side_name(Side side) { return side == Side::kUser ? "user" : "item"; }

Tensor glorot(Rng& rng, std::size_t in, std::size_t out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor w({in, out});
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

void add_dense(ParamStore& params, Rng& rng, const std::string& prefix, std::size_t in, std::size_t out) {
  params.add(prefix + ".W", ParamRole::kWeight, glorot(rng, in, out));
  params.add(prefix + ".b", ParamRole::kBias, Tensor({out}));
}

}  // namespace

Model::Model(FeatureSchema schema, ModelConfig config) : schema_(std::move(schema)), config_(std::move(config)) {
  schema_.validate();
  const auto& widths = config_.tower.widths;
  if (widths.empty()) throw ConfigError("tower needs at least one layer");
  if (std::any_of(widths.begin(), widths.end(), [](std::size_t w) { return w == 0; })) {
    throw ConfigError("tower widths must be positive");
  }
  if (!(config_.tower.dropout_rate >= 0.0 && config_.tower.dropout_rate < 1.0)) throw ConfigError("dropout must be in [0, 1)");

  if (config_.kind != ModelKind::kIntTower) config_.flags = ArchFlags{false, false, false, false};
  if (config_.flags.use_fe_block) config_.flags.fe_replace_fc = false;

  const std::size_t m = schema_.user_fields.size();
  user_heads_ = config_.user_heads ? config_.user_heads : m;
  item_heads_ = config_.item_heads ? config_.item_heads : m;
  if (config_.head_dim == 0) throw ConfigError("head_dim must be positive");

  const std::size_t L = widths.size();
  if (config_.fe_layers.empty()) {
    for (std::size_t i = 0; i < L; ++i) tapped_.push_back(i);
  } else {
    for (std::size_t layer : config_.fe_layers) {
      if (layer < 1 || layer > L) throw ConfigError("fe_layers entry " + std::to_string(layer) + " outside 1.." + std::to_string(L));
      tapped_.push_back(layer - 1);
    }
    std::sort(tapped_.begin(), tapped_.end());
    tapped_.erase(std::unique(tapped_.begin(), tapped_.end()), tapped_.end());
  }
  if (config_.flags.use_cir && config_.flags.use_fe_block && user_heads_ != item_heads_) {
    throw ConfigError("contrastive regularization compares M_u^L and M_v^L and needs equal user/item head counts");
  }
}

void Model::init(ParamStore& params, const Vocabulary& vocab, std::uint64_t seed) const {
  Rng rng(seed);
  init_embeddings(params, schema_, vocab, rng);
  const std::size_t d = schema_.embedding_dim;
  const auto& widths = config_.tower.widths;
  const std::size_t L = widths.size();

  if (config_.kind == ModelKind::kSingleTower) {
    std::size_t in = schema_.total_fields() * d;
    for (std::size_t i = 0; i < L; ++i) {
      add_dense(params, rng, "single." + std::to_string(i), in, widths[i]);
      in = widths[i];
    }
    add_dense(params, rng, "single.out", in, 1);
    return;
  }

  for (Side side : {Side::kUser, Side::kItem}) {
    const std::size_t fields = schema_.num_fields(side);
    if (config_.flags.use_light_se) add_dense(params, rng, "lightse." + side_name(side), fields, fields);
  }
  for (Side side : {Side::kUser, Side::kItem}) {
    std::size_t in = schema_.num_fields(side) * d;
    for (std::size_t i = 0; i < L; ++i) {
      add_dense(params, rng, "tower." + side_name(side) + "." + std::to_string(i), in, widths[i]);
      in = widths[i];
    }
  }
  params.add("out.bias", ParamRole::kBias, Tensor({1}));
  const std::size_t p = config_.head_dim;
  if (config_.flags.use_fe_block) {
    std::vector<std::size_t> layers = tapped_;
    if (std::find(layers.begin(), layers.end(), L - 1) == layers.end()) layers.push_back(L - 1);
    for (std::size_t i : layers) add_dense(params, rng, "head.user." + std::to_string(i), widths[i], user_heads_ * p);
    add_dense(params, rng, "head.item", widths[L - 1], item_heads_ * p);
  } else if (config_.flags.fe_replace_fc) {
    for (std::size_t i : tapped_) add_dense(params, rng, "fefc." + std::to_string(i), widths[i] + widths[L - 1], 1);
  }
}

DenseLayer Model::dense(Graph& g, ParamStore& params, const std::string& prefix) const {
  return {g.param(params.get(prefix + ".W")), g.param(params.get(prefix + ".b"))};
}

std::vector<DenseLayer> Model::dense_stack(Graph& g, ParamStore& params, const std::string& prefix) const {
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i < config_.tower.widths.size(); ++i) layers.push_back(dense(g, params, prefix + std::to_string(i)));
  return layers;
}

std::vector<Var> Model::tower(Graph& g, ParamStore& params, Side side, const Batch& batch, Mode mode, Rng* rng) const {
  Var e = embed(g, params, schema_, side, batch);
  if (config_.flags.use_light_se) {
    DenseLayer se = dense(g, params, "lightse." + side_name(side));
    e = light_se(e, se.weight, se.bias, schema_.embedding_dim);
  }
  Rng* dropout = mode == Mode::kTrain ? rng : nullptr;
  return tower_forward(e, dense_stack(g, params, "tower." + side_name(side) + "."), config_.tower.dropout_rate, dropout,
                       config_.tower.relu_output);
}

ForwardResult Model::forward(Graph& g, ParamStore& params, const Batch& batch, Mode mode, Rng* dropout_rng) const {
  if (batch.size == 0) throw ContractError("forward on an empty batch");
  if (config_.kind == ModelKind::kSingleTower) return forward_single(g, params, batch, mode, dropout_rng);
  return forward_towers(g, params, batch, mode, dropout_rng);
}

ForwardResult Model::forward_towers(Graph& g, ParamStore& params, const Batch& batch, Mode mode, Rng* rng) const {
  ForwardResult out = tower_scores(g, params, batch, mode, rng);
  out.logits = ag::add_bias(out.logits, g.param(params.get("out.bias")));
  return out;
}

ForwardResult Model::tower_scores(Graph& g, ParamStore& params, const Batch& batch, Mode mode, Rng* rng) const {
  auto hu = tower(g, params, Side::kUser, batch, mode, rng);
  auto hv = tower(g, params, Side::kItem, batch, mode, rng);
  const std::size_t last = hu.size() - 1;
  ForwardResult out;
  out.has_repr = true;

  if (config_.flags.use_fe_block) {
    const std::size_t p = config_.head_dim;
    Var mv = project_heads(hv[last], dense(g, params, "head.item"), p);
    Var logits;
    bool first = true;
    for (std::size_t i : tapped_) {
      Var mu = project_heads(hu[i], dense(g, params, "head.user." + std::to_string(i)), p);
      Var s = maxsim_score(mu, mv, p);
      logits = first ? s : ag::add(logits, s);
      first = false;
      if (i == last) out.user_repr = mu;
    }
    if (std::find(tapped_.begin(), tapped_.end(), last) == tapped_.end()) {
      out.user_repr = project_heads(hu[last], dense(g, params, "head.user." + std::to_string(last)), p);
    }
    out.logits = logits;
    out.item_repr = mv;
    return out;
  }

  out.user_repr = ag::l2_normalize(hu[last]);
  out.item_repr = ag::l2_normalize(hv[last]);
  if (config_.flags.fe_replace_fc) {
    Var logits;
    bool first = true;
    for (std::size_t i : tapped_) {
      const Var parts[] = {hu[i], hv[last]};
      DenseLayer fc = dense(g, params, "fefc." + std::to_string(i));
      Var s = ag::add_bias(ag::matmul(ag::concat(parts, 1), fc.weight), fc.bias);
      logits = first ? s : ag::add(logits, s);
      first = false;
    }
    out.logits = logits;
  } else {
    out.logits = ag::row_dot(out.user_repr, out.item_repr);
  }
  return out;
}

ForwardResult Model::forward_single(Graph& g, ParamStore& params, const Batch& batch, Mode mode, Rng* rng) const {
  const Var parts[] = {embed(g, params, schema_, Side::kUser, batch), embed(g, params, schema_, Side::kItem, batch)};
  Var x = ag::concat(parts, 1);
  auto hs = tower_forward(x, dense_stack(g, params, "single."), config_.tower.dropout_rate,
                           mode == Mode::kTrain ? rng : nullptr, true);
  DenseLayer head = dense(g, params, "single.out");
  ForwardResult out;
  out.logits = ag::add_bias(ag::matmul(hs.back(), head.weight), head.bias);
  return out;
}

double Model::output_bias(const ParamStore& params) const {
  if (config_.kind == ModelKind::kSingleTower) throw ContractError("single-tower model has no separate output bias");
  return params.get("out.bias").value.item();
}

bool Model::decoupled() const { return config_.kind != ModelKind::kSingleTower && !config_.flags.fe_replace_fc; }

ServingLayout Model::serving_layout() const {
  if (!decoupled()) throw ContractError(to_string(config_.kind) + " model has no decoupled serving layout");
  if (config_.flags.use_fe_block) return {tapped_.size(), user_heads_, item_heads_, config_.head_dim};
  return {1, 1, 1, config_.tower.widths.back()};
}

Var Model::user_side(Graph& g, ParamStore& params, const Batch& batch) const {
  serving_layout();
  auto hu = tower(g, params, Side::kUser, batch, Mode::kEval, nullptr);
  if (!config_.flags.use_fe_block) return ag::l2_normalize(hu.back());
  std::vector<Var> blocks;
  for (std::size_t i : tapped_) {
    blocks.push_back(project_heads(hu[i], dense(g, params, "head.user." + std::to_string(i)), config_.head_dim));
  }
  return blocks.size() == 1 ? blocks.front() : ag::concat(blocks, 1);
}

Var Model::item_side(Graph& g, ParamStore& params, const Batch& batch) const {
  serving_layout();
  auto hv = tower(g, params, Side::kItem, batch, Mode::kEval, nullptr);
  if (!config_.flags.use_fe_block) return ag::l2_normalize(hv.back());
  return project_heads(hv.back(), dense(g, params, "head.item"), config_.head_dim);
}

std::vector<std::string> Model::weight_names(const ParamStore& params) const {
  std::vector<std::string> names;
  for (const Parameter& p : params.all())
    if (p.role == ParamRole::kWeight) names.push_back(p.name);
  return names;
}

}  // namespace inttower
