#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "inttower/features.hpp"
#include "inttower/model.hpp"

namespace inttower {

// Flat item-vector file, little-endian:
//
//   char[4] magic "ITIX" | u32 version | u64 item_count | u32 H | u32 p
//   item_count records of: u64 item id, f32[H*p] head vectors (head-major)
//
// Records are addressed by position; the id -> position map is rebuilt in
// memory on load.
inline constexpr std::uint32_t kIndexVersion = 1;
inline constexpr std::uint64_t kIndexHeaderSize = 24;

std::uint64_t index_file_size(std::uint64_t item_count, std::uint32_t heads, std::uint32_t head_dim);

class ItemIndex {
 public:
  ItemIndex(std::uint32_t heads, std::uint32_t head_dim);

  // Appends a record; a repeated id keeps its first position for lookups.
  void add(std::uint64_t id, std::span<const float> vectors);

  std::size_t size() const noexcept { return ids_.size(); }
  std::uint32_t heads() const noexcept { return heads_; }
  std::uint32_t head_dim() const noexcept { return head_dim_; }
  std::size_t record_floats() const noexcept { return static_cast<std::size_t>(heads_) * head_dim_; }

  std::uint64_t id_at(std::size_t pos) const { return ids_.at(pos); }
  std::span<const float> vectors_at(std::size_t pos) const {
    return {data_.data() + pos * record_floats(), record_floats()};
  }
  std::optional<std::size_t> find(std::uint64_t id) const;

  std::string encode() const;
  static ItemIndex decode(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static ItemIndex load(const std::filesystem::path& path);

 private:
  std::uint32_t heads_;
  std::uint32_t head_dim_;
  std::vector<std::uint64_t> ids_;
  std::vector<float> data_;
  std::unordered_map<std::uint64_t, std::size_t> position_;
};

// Candidate items with their raw item-field values. The item id is the
// first item field, which must hold an unsigned integer.
struct ItemCatalog {
  std::vector<std::uint64_t> ids;
  std::vector<std::vector<std::string>> values;  // per item, schema item-field order

  std::size_t size() const { return ids.size(); }
};

std::uint64_t parse_item_id(const std::string& raw);
ItemCatalog read_catalog(const std::filesystem::path& path, const FeatureSchema& schema);
// Distinct items of a data table, by first appearance.
ItemCatalog catalog_from_table(const FeatureSchema& schema, const RawTable& table);

struct EncodedCatalog {
  std::vector<std::uint64_t> ids;
  std::vector<std::uint32_t> item_ids;  // size x item_fields
  std::size_t item_fields = 0;
  std::size_t oov_values = 0;
  std::unordered_map<std::uint64_t, std::size_t> position;

  std::size_t size() const { return ids.size(); }
};

EncodedCatalog encode_catalog(const FeatureSchema& schema, const Vocabulary& vocab, const ItemCatalog& catalog);

// Runs the item tower (and its head projection) once per item and stores
// the float32 heads. Unknown field values encode as OOV; a warning line is
// written to `warnings` when any were seen.
ItemIndex export_items(const Model& model, ParamStore& params, const Vocabulary& vocab, const ItemCatalog& catalog,
                       std::ostream* warnings = nullptr, std::size_t batch_size = 1024);

}  // namespace inttower
