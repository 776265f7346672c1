#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "inttower/autograd.hpp"
#include "inttower/params.hpp"
#include "inttower/rng.hpp"

namespace inttower {

enum class Side { kUser, kItem };

struct FeatureSchema {
  std::vector<std::string> user_fields;
  std::vector<std::string> item_fields;
  std::string label_field = "label";
  std::size_t embedding_dim = 32;

  void validate() const;
  std::size_t num_fields(Side side) const { return side == Side::kUser ? user_fields.size() : item_fields.size(); }
  // Global field index: user fields first, then item fields.
  std::size_t field_index(Side side, std::size_t i) const { return side == Side::kUser ? i : user_fields.size() + i; }
  std::size_t total_fields() const { return user_fields.size() + item_fields.size(); }
  const std::string& field_name(std::size_t global) const;
  // FNV-1a over a canonical rendering; stored in checkpoints.
  std::uint64_t hash() const;
};

// Per-field categorical encoding. Id 0 is reserved for out-of-vocabulary
// values; known values get ids 1.. in order of first appearance.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(const FeatureSchema& schema);

  std::uint32_t add(std::size_t field, std::string_view value);
  std::uint32_t encode(std::size_t field, std::string_view value) const;
  const std::string& decode(std::size_t field, std::uint32_t id) const;
  std::size_t size(std::size_t field) const { return values_[field].size(); }  // includes the OOV row
  std::size_t num_fields() const { return values_.size(); }
  const std::string& field_name(std::size_t field) const { return fields_[field]; }

  // Text map, one "field<TAB>value<TAB>id" line per known value.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path, const FeatureSchema& schema);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.values_ == b.values_ && a.fields_ == b.fields_; }

 private:
  std::vector<std::string> fields_;
  std::vector<std::vector<std::string>> values_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> ids_;
};

// CSV rows projected onto the schema's fields (user fields then item fields).
struct RawTable {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return rows.size(); }
};

// Fixed-size instances ready for the model.
struct Batch {
  std::size_t size = 0;
  std::size_t user_fields = 0;
  std::size_t item_fields = 0;
  std::vector<std::uint32_t> user_ids;  // size x user_fields
  std::vector<std::uint32_t> item_ids;  // size x item_fields
  std::vector<std::uint8_t> labels;

  std::span<const std::uint32_t> ids(Side side) const { return side == Side::kUser ? user_ids : item_ids; }
  std::size_t fields(Side side) const { return side == Side::kUser ? user_fields : item_fields; }
};

struct Dataset {
  std::size_t user_fields = 0;
  std::size_t item_fields = 0;
  std::vector<std::uint32_t> user_ids;
  std::vector<std::uint32_t> item_ids;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  Batch batch(std::span<const std::size_t> rows) const;
  Batch all() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

RawTable read_csv(const std::filesystem::path& path, const FeatureSchema& schema);
std::vector<std::string> split_csv_line(std::string_view line);

// Vocabulary built from the given rows only (all rows when empty).
Vocabulary build_vocabulary(const FeatureSchema& schema, const RawTable& raw, std::span<const std::size_t> rows = {});
Dataset encode(const FeatureSchema& schema, const Vocabulary& vocab, const RawTable& raw,
               std::span<const std::size_t> rows = {});

struct LoadedData {
  Vocabulary vocab;
  Dataset data;
};
LoadedData load_csv(const std::filesystem::path& path, const FeatureSchema& schema);

// Seeded random partition; the first round(ratio * n) shuffled rows train.
Split split(std::size_t n, double ratio, std::uint64_t seed);

// Embedding tables: one V_f x d parameter per field, named "emb.<field>",
// initialized uniform in [-1/sqrt(d), 1/sqrt(d)].
void init_embeddings(ParamStore& params, const FeatureSchema& schema, const Vocabulary& vocab, Rng& rng);
std::string embedding_name(const std::string& field);

// Concatenated per-field embedding rows in schema order: B x (fields * d).
Var embed(Graph& g, ParamStore& params, const FeatureSchema& schema, Side side, const Batch& batch);

struct SyntheticConfig {
  std::size_t num_users = 1000;
  std::size_t num_items = 500;
  std::size_t num_rows = 50000;
  std::size_t latent_rank = 8;
  std::size_t interests = 3;   // latent interest vectors per user
  double noise = 0.5;          // std-dev of label noise on the preference score
  double positive_rate = 0.35;
  std::uint64_t seed = 7;
};

// Writes a CSV whose labels come from a planted multi-interest low-rank
// preference: score = max_k <u_k, v> + user bias + item bias (+ noise),
// thresholded at the (1 - positive_rate) quantile. The first user field is
// the user id, the first item field the numeric item id; the second field
// on each side is a coarse attribute derived from the latent vectors and any
// further fields are uninformative.
void generate_synthetic(const FeatureSchema& schema, const SyntheticConfig& config, const std::filesystem::path& out);

}  // namespace inttower
