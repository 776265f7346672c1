#include "inttower/features.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "inttower/errors.hpp"

namespace inttower {

void FeatureSchema::validate() const {
  if (user_fields.empty()) throw ConfigError("schema needs at least one user field");
  if (item_fields.empty()) throw ConfigError("schema needs at least one item field");
  if (embedding_dim == 0) throw ConfigError("embedding_dim must be positive");
  std::set<std::string> seen;
  for (const auto* list : {&user_fields, &item_fields}) {
    for (const auto& f : *list) {
      if (f.empty()) throw ConfigError("empty field name");
      if (!seen.insert(f).second) throw ConfigError("duplicate field name '" + f + "'");
    }
  }
  if (seen.count(label_field)) throw ConfigError("label field '" + label_field + "' is also a feature");
}

const std::string& FeatureSchema::field_name(std::size_t global) const {
  return global < user_fields.size() ? user_fields[global] : item_fields[global - user_fields.size()];
}

std::uint64_t FeatureSchema::hash() const {
  std::ostringstream os;
  os << "user:";
  for (const auto& f : user_fields) os << f << ',';
  os << ";item:";
  for (const auto& f : item_fields) os << f << ',';
  os << ";label:" << label_field << ";d:" << embedding_dim;
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Vocabulary::Vocabulary(const FeatureSchema& schema) {
  for (std::size_t f = 0; f < schema.total_fields(); ++f) {
    fields_.push_back(schema.field_name(f));
    values_.push_back({""});
    ids_.emplace_back();
  }
}

std::uint32_t Vocabulary::add(std::size_t field, std::string_view value) {
  auto& ids = ids_.at(field);
  auto it = ids.find(std::string(value));
  if (it != ids.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(values_[field].size());
  values_[field].emplace_back(value);
  ids.emplace(std::string(value), id);
  return id;
}

std::uint32_t Vocabulary::encode(std::size_t field, std::string_view value) const {
  const auto& ids = ids_.at(field);
  auto it = ids.find(std::string(value));
  return it == ids.end() ? 0 : it->second;
}

const std::string& Vocabulary::decode(std::size_t field, std::uint32_t id) const {
  if (id >= values_.at(field).size()) throw IndexError("id " + std::to_string(id) + " outside vocabulary");
  return values_[field][id];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t f = 0; f < fields_.size(); ++f)
    for (std::size_t id = 1; id < values_[f].size(); ++id) out << fields_[f] << '\t' << values_[f][id] << '\t' << id << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocabulary " + path.string());
  Vocabulary vocab(schema);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.rfind('\t');
    if (t1 == std::string::npos || t1 == t2) throw FormatError("vocabulary line " + std::to_string(lineno));
    const std::string field = line.substr(0, t1);
    const std::string value = line.substr(t1 + 1, t2 - t1 - 1);
    const auto id = std::stoul(line.substr(t2 + 1));
    std::size_t f = 0;
    while (f < vocab.fields_.size() && vocab.fields_[f] != field) ++f;
    if (f == vocab.fields_.size()) throw FormatError("vocabulary names unknown field '" + field + "'");
    if (vocab.add(f, value) != id) throw FormatError("vocabulary ids out of order at line " + std::to_string(lineno));
  }
  return vocab;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

RawTable read_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  schema.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + " has no header row");
  const auto header = split_csv_line(line);
  auto column_of = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    throw DataError("missing column '" + name + "' in " + path.string());
  };
  std::vector<std::size_t> cols;
  for (std::size_t f = 0; f < schema.total_fields(); ++f) cols.push_back(column_of(schema.field_name(f)));
  const std::size_t label_col = column_of(schema.label_field);

  RawTable table;
  std::size_t rowno = 1;
  while (std::getline(in, line)) {
    ++rowno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(rowno) + " has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    const std::string& label = cells[label_col];
    if (label != "0" && label != "1") throw DataError("label '" + label + "' at row " + std::to_string(rowno) + " is not 0/1");
    std::vector<std::string> row;
    row.reserve(cols.size());
    for (std::size_t c : cols) row.push_back(std::move(cells[c]));
    table.rows.push_back(std::move(row));
    table.labels.push_back(label == "1" ? 1 : 0);
  }
  return table;
}

namespace {

template <typename F>
void for_rows(std::size_t n, std::span<const std::size_t> rows, F&& f) {
  if (rows.empty()) {
    for (std::size_t i = 0; i < n; ++i) f(i);
  } else {
    for (std::size_t i : rows) f(i);
  }
}

}  // namespace

Vocabulary build_vocabulary(const FeatureSchema& schema, const RawTable& raw, std::span<const std::size_t> rows) {
  Vocabulary vocab(schema);
  for_rows(raw.size(), rows, [&](std::size_t r) {
    for (std::size_t f = 0; f < schema.total_fields(); ++f) vocab.add(f, raw.rows[r][f]);
  });
  return vocab;
}

Dataset encode(const FeatureSchema& schema, const Vocabulary& vocab, const RawTable& raw, std::span<const std::size_t> rows) {
  Dataset ds;
  ds.user_fields = schema.user_fields.size();
  ds.item_fields = schema.item_fields.size();
  for_rows(raw.size(), rows, [&](std::size_t r) {
    for (std::size_t f = 0; f < ds.user_fields; ++f) ds.user_ids.push_back(vocab.encode(f, raw.rows[r][f]));
    for (std::size_t f = 0; f < ds.item_fields; ++f)
      ds.item_ids.push_back(vocab.encode(ds.user_fields + f, raw.rows[r][ds.user_fields + f]));
    ds.labels.push_back(raw.labels[r]);
  });
  return ds;
}

LoadedData load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  RawTable raw = read_csv(path, schema);
  Vocabulary vocab = build_vocabulary(schema, raw);
  Dataset data = encode(schema, vocab, raw);
  return {std::move(vocab), std::move(data)};
}

Batch Dataset::batch(std::span<const std::size_t> rows) const {
  Batch b;
  b.size = rows.size();
  b.user_fields = user_fields;
  b.item_fields = item_fields;
  b.user_ids.reserve(rows.size() * user_fields);
  b.item_ids.reserve(rows.size() * item_fields);
  for (std::size_t r : rows) {
    if (r >= size()) throw IndexError("row " + std::to_string(r) + " outside dataset of " + std::to_string(size()));
    b.user_ids.insert(b.user_ids.end(), user_ids.begin() + r * user_fields, user_ids.begin() + (r + 1) * user_fields);
    b.item_ids.insert(b.item_ids.end(), item_ids.begin() + r * item_fields, item_ids.begin() + (r + 1) * item_fields);
    b.labels.push_back(labels[r]);
  }
  return b;
}

Batch Dataset::all() const {
  std::vector<std::size_t> rows(size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return batch(rows);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Batch b = batch(rows);
  Dataset ds;
  ds.user_fields = user_fields;
  ds.item_fields = item_fields;
  ds.user_ids = std::move(b.user_ids);
  ds.item_ids = std::move(b.item_ids);
  ds.labels = std::move(b.labels);
  return ds;
}

Split split(std::size_t n, double ratio, std::uint64_t seed) {
  if (n == 0) throw DataError("cannot split an empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0, 1)");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return s;
}

std::string embedding_name(const std::string& field) { return "emb." + field; }

void init_embeddings(ParamStore& params, const FeatureSchema& schema, const Vocabulary& vocab, Rng& rng) {
  const std::size_t d = schema.embedding_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t f = 0; f < schema.total_fields(); ++f) {
    Tensor table({vocab.size(f), d});
    for (double& v : table.values()) v = rng.uniform(-bound, bound);
    params.add(embedding_name(schema.field_name(f)), ParamRole::kEmbedding, std::move(table));
  }
}

Var embed(Graph& g, ParamStore& params, const FeatureSchema& schema, Side side, const Batch& batch) {
  const std::size_t fields = batch.fields(side);
  if (fields != schema.num_fields(side)) throw ShapeError("batch field count does not match schema");
  const auto ids = batch.ids(side);
  std::vector<Var> parts;
  std::vector<std::uint32_t> column(batch.size);
  for (std::size_t f = 0; f < fields; ++f) {
    for (std::size_t b = 0; b < batch.size; ++b) column[b] = ids[b * fields + f];
    const std::string& name = side == Side::kUser ? schema.user_fields[f] : schema.item_fields[f];
    parts.push_back(ag::gather_rows(g.param(params.get(embedding_name(name))), column));
  }
  return parts.size() == 1 ? parts.front() : ag::concat(parts, 1);
}

}  // namespace inttower
