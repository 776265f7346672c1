#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "inttower/features.hpp"
#include "inttower/item_index.hpp"
#include "inttower/model.hpp"

namespace inttower {

struct ScoreRequest {
  std::vector<std::string> user_values;  // schema user-field order
  std::vector<std::uint64_t> candidates;
};

struct RankedItem {
  std::uint64_t id = 0;
  double score = 0.0;
};

struct ScoreResponse {
  std::vector<std::optional<double>> scores;  // aligned with the request's candidates
  std::vector<std::uint64_t> missing;         // candidate ids that could not be scored
  std::vector<RankedItem> ranking;            // scored candidates, score desc then id asc

  std::string to_json() const;
};

// Orders scored candidates by non-increasing score, ties by ascending id.
std::vector<RankedItem> rank_candidates(const std::vector<std::uint64_t>& ids,
                                        const std::vector<std::optional<double>>& scores);

Batch encode_user(const FeatureSchema& schema, const Vocabulary& vocab, const std::vector<std::string>& values);

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual ScoreResponse score(const ScoreRequest& request) const = 0;
  // Network inferences performed so far (tower or full-network passes).
  std::uint64_t inferences() const noexcept { return inferences_.load(); }
  void reset_inferences() noexcept { inferences_.store(0); }

 protected:
  mutable std::atomic<std::uint64_t> inferences_{0};
};

// One user-tower pass per request, then MaxSim of the user's tapped-layer
// heads against precomputed float32 item heads.
class DecoupledScorer : public Scorer {
 public:
  DecoupledScorer(const Model& model, ParamStore& params, const Vocabulary& vocab, const ItemIndex& index);
  ScoreResponse score(const ScoreRequest& request) const override;

 private:
  const Model& model_;
  ParamStore& params_;
  const Vocabulary& vocab_;
  const ItemIndex& index_;
  ServingLayout layout_;
};

// Full network per (user, candidate) pair.
class SingleTowerScorer : public Scorer {
 public:
  SingleTowerScorer(const Model& model, ParamStore& params, const Vocabulary& vocab, const EncodedCatalog& catalog);
  ScoreResponse score(const ScoreRequest& request) const override;

 private:
  const Model& model_;
  ParamStore& params_;
  const Vocabulary& vocab_;
  const EncodedCatalog& catalog_;
};

}  // namespace inttower
