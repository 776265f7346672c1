#include "inttower/serving.hpp"

#include <algorithm>

#include "inttower/errors.hpp"
#include "inttower/kernels.hpp"
#include "json.hpp"

namespace inttower {

std::string ScoreResponse::to_json() const {
  nlohmann::ordered_json j;
  j["ranking"] = nlohmann::ordered_json::array();
  for (const auto& r : ranking) j["ranking"].push_back({{"id", r.id}, {"score", r.score}});
  j["missing"] = missing;
  return j.dump();
}

std::vector<RankedItem> rank_candidates(const std::vector<std::uint64_t>& ids,
                                        const std::vector<std::optional<double>>& scores) {
  std::vector<RankedItem> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (scores[i]) out.push_back({ids[i], *scores[i]});
  std::stable_sort(out.begin(), out.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return out;
}

Batch encode_user(const FeatureSchema& schema, const Vocabulary& vocab, const std::vector<std::string>& values) {
  if (values.size() != schema.user_fields.size()) {
    throw DataError("request has " + std::to_string(values.size()) + " user values, schema has " +
                    std::to_string(schema.user_fields.size()) + " user fields");
  }
  Batch b;
  b.size = 1;
  b.user_fields = schema.user_fields.size();
  b.item_fields = schema.item_fields.size();
  for (std::size_t f = 0; f < values.size(); ++f) b.user_ids.push_back(vocab.encode(f, values[f]));
  b.labels = {0};
  return b;
}

namespace {

void check_request(const ScoreRequest& request) {
  if (request.candidates.empty()) throw ContractError("score request needs at least one candidate");
}

}  // namespace

DecoupledScorer::DecoupledScorer(const Model& model, ParamStore& params, const Vocabulary& vocab, const ItemIndex& index)
    : model_(model), params_(params), vocab_(vocab), index_(index), layout_(model.serving_layout()) {
  if (index.heads() != layout_.item_heads || index.head_dim() != layout_.head_dim) {
    throw FormatError("item index holds " + std::to_string(index.heads()) + "x" + std::to_string(index.head_dim()) +
                      " heads, model expects " + std::to_string(layout_.item_heads) + "x" +
                      std::to_string(layout_.head_dim));
  }
}

ScoreResponse DecoupledScorer::score(const ScoreRequest& request) const {
  check_request(request);
  Batch user = encode_user(model_.schema(), vocab_, request.user_values);
  Graph g(false);
  const Tensor& heads = model_.user_side(g, params_, user).value();
  inferences_.fetch_add(1);

  const std::size_t k = request.candidates.size();
  std::vector<const float*> items;
  std::vector<std::size_t> slot;
  items.reserve(k);
  slot.reserve(k);
  ScoreResponse resp;
  resp.scores.assign(k, std::nullopt);
  for (std::size_t i = 0; i < k; ++i) {
    auto pos = index_.find(request.candidates[i]);
    if (!pos) {
      resp.missing.push_back(request.candidates[i]);
      continue;
    }
    items.push_back(index_.vectors_at(*pos).data());
    slot.push_back(i);
  }
  std::vector<double> out(items.size());
  kernels::omp::maxsim_candidates(heads.data(), layout_.user_layers, layout_.user_heads, items.data(), items.size(),
                                  layout_.item_heads, layout_.head_dim, out.data());
  const double bias = model_.output_bias(params_);
  for (std::size_t j = 0; j < out.size(); ++j) resp.scores[slot[j]] = out[j] + bias;
  resp.ranking = rank_candidates(request.candidates, resp.scores);
  return resp;
}

SingleTowerScorer::SingleTowerScorer(const Model& model, ParamStore& params, const Vocabulary& vocab,
                                     const EncodedCatalog& catalog)
    : model_(model), params_(params), vocab_(vocab), catalog_(catalog) {
  if (catalog.item_fields != model.schema().item_fields.size()) throw ContractError("catalog does not match the schema");
}

ScoreResponse SingleTowerScorer::score(const ScoreRequest& request) const {
  check_request(request);
  Batch pair = encode_user(model_.schema(), vocab_, request.user_values);
  const std::size_t n = catalog_.item_fields;
  pair.item_ids.resize(n);
  ScoreResponse resp;
  resp.scores.assign(request.candidates.size(), std::nullopt);
  for (std::size_t i = 0; i < request.candidates.size(); ++i) {
    auto it = catalog_.position.find(request.candidates[i]);
    if (it == catalog_.position.end()) {
      resp.missing.push_back(request.candidates[i]);
      continue;
    }
    std::copy_n(catalog_.item_ids.begin() + static_cast<std::ptrdiff_t>(it->second * n), n, pair.item_ids.begin());
    Graph g(false);
    resp.scores[i] = model_.forward(g, params_, pair, Mode::kEval).logits.value().item();
    inferences_.fetch_add(1);
  }
  resp.ranking = rank_candidates(request.candidates, resp.scores);
  return resp;
}

}  // namespace inttower
