#include "inttower/item_index.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

#include "inttower/binary_io.hpp"
#include "inttower/checkpoint.hpp"
#include "inttower/errors.hpp"

namespace inttower {

std::uint64_t index_file_size(std::uint64_t item_count, std::uint32_t heads, std::uint32_t head_dim) {
  return kIndexHeaderSize + item_count * (8 + 4 * static_cast<std::uint64_t>(heads) * head_dim);
}

ItemIndex::ItemIndex(std::uint32_t heads, std::uint32_t head_dim) : heads_(heads), head_dim_(head_dim) {
  if (heads == 0 || head_dim == 0) throw ContractError("item index needs positive head count and head dim");
}

void ItemIndex::add(std::uint64_t id, std::span<const float> vectors) {
  if (vectors.size() != record_floats()) {
    throw ShapeError("item record has " + std::to_string(vectors.size()) + " floats, expected " +
                     std::to_string(record_floats()));
  }
  position_.emplace(id, ids_.size());
  ids_.push_back(id);
  data_.insert(data_.end(), vectors.begin(), vectors.end());
}

std::optional<std::size_t> ItemIndex::find(std::uint64_t id) const {
  auto it = position_.find(id);
  if (it == position_.end()) return std::nullopt;
  return it->second;
}

std::string ItemIndex::encode() const {
  std::string out;
  out.reserve(index_file_size(size(), heads_, head_dim_));
  binary::put_bytes(out, "ITIX");
  binary::put<std::uint32_t>(out, kIndexVersion);
  binary::put<std::uint64_t>(out, ids_.size());
  binary::put<std::uint32_t>(out, heads_);
  binary::put<std::uint32_t>(out, head_dim_);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    binary::put<std::uint64_t>(out, ids_[i]);
    for (float v : vectors_at(i)) binary::put<float>(out, v);
  }
  return out;
}

ItemIndex ItemIndex::decode(const std::string& bytes) {
  binary::Reader in(bytes.data(), bytes.size(), "item index");
  if (bytes.size() < kIndexHeaderSize) throw FormatError("item index shorter than its header");
  if (in.bytes(4) != "ITIX") throw FormatError("not an item index (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kIndexVersion) throw FormatError("unsupported item index version " + std::to_string(version));
  const auto count = in.get<std::uint64_t>();
  const auto heads = in.get<std::uint32_t>();
  const auto dim = in.get<std::uint32_t>();
  if (heads == 0 || dim == 0) throw FormatError("item index declares zero heads or head dim");
  const std::uint64_t record = 8 + 4 * static_cast<std::uint64_t>(heads) * dim;
  if (count > (bytes.size() - kIndexHeaderSize) / record || index_file_size(count, heads, dim) != bytes.size()) {
    throw FormatError("item index length " + std::to_string(bytes.size()) + " does not match header (" +
                      std::to_string(count) + " items of " + std::to_string(heads) + "x" + std::to_string(dim) + ")");
  }
  ItemIndex index(heads, dim);
  index.ids_.reserve(count);
  index.data_.reserve(count * heads * dim);
  std::vector<float> rec(static_cast<std::size_t>(heads) * dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto id = in.get<std::uint64_t>();
    for (float& v : rec) v = in.get<float>();
    index.add(id, rec);
  }
  return index;
}

void ItemIndex::save(const std::filesystem::path& path) const { write_file(path, encode()); }

ItemIndex ItemIndex::load(const std::filesystem::path& path) { return decode(read_file(path)); }

std::uint64_t parse_item_id(const std::string& raw) {
  std::uint64_t id = 0;
  const auto* end = raw.data() + raw.size();
  auto [ptr, ec] = std::from_chars(raw.data(), end, id);
  if (ec != std::errc() || ptr != end || raw.empty()) throw DataError("item id '" + raw + "' is not an unsigned integer");
  return id;
}

ItemCatalog read_catalog(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open catalog " + path.string());
  std::string line;
  ItemCatalog catalog;
  if (!std::getline(in, line)) return catalog;
  const auto header = split_csv_line(line);
  std::vector<std::size_t> cols;
  for (const auto& field : schema.item_fields) {
    std::size_t c = 0;
    while (c < header.size() && header[c] != field) ++c;
    if (c == header.size()) throw DataError("missing column '" + field + "' in catalog " + path.string());
    cols.push_back(c);
  }
  std::size_t rowno = 1;
  while (std::getline(in, line)) {
    ++rowno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw DataError("catalog row " + std::to_string(rowno) + " has the wrong cell count");
    std::vector<std::string> values;
    for (std::size_t c : cols) values.push_back(cells[c]);
    catalog.ids.push_back(parse_item_id(values.front()));
    catalog.values.push_back(std::move(values));
  }
  return catalog;
}

ItemCatalog catalog_from_table(const FeatureSchema& schema, const RawTable& table) {
  ItemCatalog catalog;
  std::unordered_map<std::uint64_t, bool> seen;
  const std::size_t m = schema.user_fields.size();
  for (const auto& row : table.rows) {
    std::vector<std::string> values(row.begin() + static_cast<std::ptrdiff_t>(m), row.end());
    const auto id = parse_item_id(values.front());
    if (!seen.emplace(id, true).second) continue;
    catalog.ids.push_back(id);
    catalog.values.push_back(std::move(values));
  }
  return catalog;
}

EncodedCatalog encode_catalog(const FeatureSchema& schema, const Vocabulary& vocab, const ItemCatalog& catalog) {
  EncodedCatalog enc;
  enc.item_fields = schema.item_fields.size();
  const std::size_t m = schema.user_fields.size();
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (catalog.values[i].size() != enc.item_fields) throw DataError("catalog item has the wrong field count");
    enc.position.emplace(catalog.ids[i], enc.ids.size());
    enc.ids.push_back(catalog.ids[i]);
    for (std::size_t f = 0; f < enc.item_fields; ++f) {
      const auto id = vocab.encode(m + f, catalog.values[i][f]);
      if (id == 0) ++enc.oov_values;
      enc.item_ids.push_back(id);
    }
  }
  return enc;
}

ItemIndex export_items(const Model& model, ParamStore& params, const Vocabulary& vocab, const ItemCatalog& catalog,
                       std::ostream* warnings, std::size_t batch_size) {
  const ServingLayout layout = model.serving_layout();
  ItemIndex index(static_cast<std::uint32_t>(layout.item_heads), static_cast<std::uint32_t>(layout.head_dim));
  EncodedCatalog enc = encode_catalog(model.schema(), vocab, catalog);
  if (enc.oov_values > 0 && warnings != nullptr) {
    *warnings << "warning: " << enc.oov_values << " catalog field values are not in the vocabulary; encoded as OOV\n";
  }
  const std::size_t n = enc.item_fields;
  std::vector<float> rec(index.record_floats());
  for (std::size_t start = 0; start < enc.size(); start += batch_size) {
    const std::size_t end = std::min(enc.size(), start + batch_size);
    Batch b;
    b.size = end - start;
    b.item_fields = n;
    b.user_fields = model.schema().user_fields.size();
    b.item_ids.assign(enc.item_ids.begin() + static_cast<std::ptrdiff_t>(start * n),
                      enc.item_ids.begin() + static_cast<std::ptrdiff_t>(end * n));
    Graph g(false);
    const Tensor& heads = model.item_side(g, params, b).value();
    for (std::size_t r = 0; r < b.size; ++r) {
      auto row = heads.row(r);
      for (std::size_t t = 0; t < rec.size(); ++t) rec[t] = static_cast<float>(row[t]);
      index.add(enc.ids[start + r], rec);
    }
  }
  return index;
}

}  // namespace inttower
