#pragma once

#include <string>
#include <vector>

#include "inttower/autograd.hpp"
#include "inttower/features.hpp"
#include "inttower/params.hpp"
#include "inttower/rng.hpp"

namespace inttower {

enum class ModelKind { kIntTower, kTwoTower, kSingleTower };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct TowerConfig {
  std::vector<std::size_t> widths{300, 300, 128};
  double dropout_rate = 0.1;
  // ReLU on the last layer too. Off by default: a non-negative output makes
  // the cosine score of two towers one-sided and prone to collapsing to zero.
  bool relu_output = false;

  std::size_t num_layers() const { return widths.size(); }
};

struct ArchFlags {
  bool use_light_se = true;
  bool use_fe_block = true;
  bool use_cir = true;
  // With use_fe_block off, score with FC(h_u^i || h_v^L) per tapped layer
  // instead of the plain inner product. Not decoupled-servable.
  bool fe_replace_fc = false;
};

struct ModelConfig {
  ModelKind kind = ModelKind::kIntTower;
  TowerConfig tower;
  std::size_t user_heads = 0;  // 0: number of user fields
  std::size_t item_heads = 0;  // 0: number of user fields
  std::size_t head_dim = 64;
  std::vector<std::size_t> fe_layers;  // 1-based user layers with an FE-Block; empty: all
  ArchFlags flags;
};

enum class Mode { kTrain, kEval };

struct ForwardResult {
  Var logits;      // B x 1
  Var user_repr;   // M_u^L (or the normalized final user layer); invalid for single-tower
  Var item_repr;   // M_v^L counterpart
  bool has_repr = false;
};

// Geometry of what the decoupled path stores and consumes.
struct ServingLayout {
  std::size_t user_layers = 1;  // tapped user layers summed at scoring time
  std::size_t user_heads = 1;
  std::size_t item_heads = 1;
  std::size_t head_dim = 0;
};

// --- building blocks ---------------------------------------------------------

struct DenseLayer {
  Var weight;  // in x out
  Var bias;    // out
};

// Squeeze (per-field mean), excite (softmax(zW + b)), re-weight each field.
Var light_se(Var embeddings, Var weight, Var bias, std::size_t embedding_dim);
// Field weights k (B x fields) produced inside light_se, exposed for tests.
Var light_se_weights(Var embeddings, Var weight, Var bias, std::size_t embedding_dim);

// x W + b per layer, relu on all but the last unless relu_output; returns
// h^1..h^L. Dropout follows each relu when rng is non-null and rate > 0.
std::vector<Var> tower_forward(Var x, const std::vector<DenseLayer>& layers, double dropout_rate, Rng* rng,
                               bool relu_output = false);

// Affine projection into H heads of size p, each head L2-normalized.
Var project_heads(Var h, const DenseLayer& proj, std::size_t head_dim);

Var maxsim_score(Var user_heads, Var item_heads, std::size_t head_dim);

// --- assembled models --------------------------------------------------------

class Model {
 public:
  Model(FeatureSchema schema, ModelConfig config);

  const FeatureSchema& schema() const noexcept { return schema_; }
  const ModelConfig& config() const noexcept { return config_; }
  std::size_t user_heads() const noexcept { return user_heads_; }
  std::size_t item_heads() const noexcept { return item_heads_; }
  // 0-based user layers feeding the FE-Block.
  const std::vector<std::size_t>& tapped_layers() const noexcept { return tapped_; }

  void init(ParamStore& params, const Vocabulary& vocab, std::uint64_t seed) const;

  ForwardResult forward(Graph& g, ParamStore& params, const Batch& batch, Mode mode, Rng* dropout_rng = nullptr) const;

  // Tower models: logits = interaction score + a learned global bias.
  double output_bias(const ParamStore& params) const;

  // Decoupled halves (eval mode). user_side returns B x (layers*H_u*p),
  // item_side B x (H_v*p); summing maxsim over the user layer blocks and
  // adding output_bias reproduces forward()'s logits.
  bool decoupled() const;
  ServingLayout serving_layout() const;
  Var user_side(Graph& g, ParamStore& params, const Batch& batch) const;
  Var item_side(Graph& g, ParamStore& params, const Batch& batch) const;

  // Names of matrices covered by the L2 term.
  std::vector<std::string> weight_names(const ParamStore& params) const;

 private:
  std::vector<DenseLayer> dense_stack(Graph& g, ParamStore& params, const std::string& prefix) const;
  DenseLayer dense(Graph& g, ParamStore& params, const std::string& prefix) const;
  std::vector<Var> tower(Graph& g, ParamStore& params, Side side, const Batch& batch, Mode mode, Rng* rng) const;
  ForwardResult tower_scores(Graph& g, ParamStore& params, const Batch& batch, Mode mode, Rng* rng) const;
  ForwardResult forward_towers(Graph& g, ParamStore& params, const Batch& batch, Mode mode, Rng* rng) const;
  ForwardResult forward_single(Graph& g, ParamStore& params, const Batch& batch, Mode mode, Rng* rng) const;

  FeatureSchema schema_;
  ModelConfig config_;
  std::size_t user_heads_ = 1;
  std::size_t item_heads_ = 1;
  std::vector<std::size_t> tapped_;
};

}  // namespace inttower
