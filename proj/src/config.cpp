#include "inttower/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "inttower/checkpoint.hpp"
#include "inttower/errors.hpp"

namespace inttower {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& key, std::string v) {
  v = trim(v);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (!v.empty() && v.front() == '"') throw ConfigError(key + ": unterminated string");
  return v;
}

std::vector<std::string> parse_list(const std::string& key, const std::string& raw) {
  std::string v = trim(raw);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') throw ConfigError(key + ": expected a [list], got '" + raw + "'");
  std::vector<std::string> out;
  std::string inner = trim(std::string_view(v).substr(1, v.size() - 2));
  if (inner.empty()) return out;
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(key, item);
    if (item.empty()) throw ConfigError(key + ": empty list element");
    out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string v = unquote(key, raw);
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || ptr != end) throw ConfigError(key + ": '" + raw + "' is not a valid number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = unquote(key, raw);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + raw + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& raw) {
  std::vector<std::size_t> out;
  for (const auto& s : parse_list(key, raw)) out.push_back(parse_number<std::size_t>(key, s));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
std::string fmt(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string fmt_int(T v) { return std::to_string(v); }
std::string fmt_str(const std::string& v) { return "\"" + v + "\""; }
std::string fmt_strs(const std::vector<std::string>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt_str(v[i]);
  return out + "]";
}
std::string fmt_sizes(const std::vector<std::size_t>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out + "]";
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_KEY(NAME, FIELD)                                                                     \
  Key {                                                                                           \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<std::size_t>(NAME, v); }, \
        [](const RunConfig& c) { return fmt_int(c.FIELD); }                                       \
  }
#define U64_KEY(NAME, FIELD)                                                                        \
  Key {                                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<std::uint64_t>(NAME, v); }, \
        [](const RunConfig& c) { return fmt_int(c.FIELD); }                                         \
  }
#define DOUBLE_KEY(NAME, FIELD)                                                              \
  Key {                                                                                      \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<double>(NAME, v); }, \
        [](const RunConfig& c) { return fmt(c.FIELD); }                                      \
  }
#define BOOL_KEY(NAME, FIELD)                                                        \
  Key {                                                                              \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_bool(NAME, v); }, \
        [](const RunConfig& c) { return fmt(c.FIELD); }                              \
  }
#define STRING_KEY(NAME, FIELD)                                                   \
  Key {                                                                           \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = unquote(NAME, v); }, \
        [](const RunConfig& c) { return fmt_str(c.FIELD); }                       \
  }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      Key{"model", [](RunConfig& c, const std::string& v) { c.model.kind = parse_model_kind(unquote("model", v)); },
          [](const RunConfig& c) { return fmt_str(to_string(c.model.kind)); }},
      Key{"user_fields", [](RunConfig& c, const std::string& v) { c.schema.user_fields = parse_list("user_fields", v); },
          [](const RunConfig& c) { return fmt_strs(c.schema.user_fields); }},
      Key{"item_fields", [](RunConfig& c, const std::string& v) { c.schema.item_fields = parse_list("item_fields", v); },
          [](const RunConfig& c) { return fmt_strs(c.schema.item_fields); }},
      STRING_KEY("label_field", schema.label_field),
      SIZE_KEY("embedding_dim", schema.embedding_dim),
      Key{"widths", [](RunConfig& c, const std::string& v) { c.model.tower.widths = parse_sizes("widths", v); },
          [](const RunConfig& c) { return fmt_sizes(c.model.tower.widths); }},
      // Layer count; must agree with the length of `widths`.
      Key{"num_layers",
          [](RunConfig& c, const std::string& v) {
            const auto n = parse_number<std::size_t>("num_layers", v);
            if (n != c.model.tower.widths.size()) {
              throw ConfigError("num_layers = " + std::to_string(n) + " but widths lists " +
                                std::to_string(c.model.tower.widths.size()) + " layers");
            }
          },
          [](const RunConfig& c) { return fmt_int(c.model.tower.widths.size()); }},
      DOUBLE_KEY("dropout", model.tower.dropout_rate),
      BOOL_KEY("relu_output", model.tower.relu_output),
      SIZE_KEY("user_heads", model.user_heads),
      SIZE_KEY("item_heads", model.item_heads),
      SIZE_KEY("head_dim", model.head_dim),
      Key{"fe_layers", [](RunConfig& c, const std::string& v) { c.model.fe_layers = parse_sizes("fe_layers", v); },
          [](const RunConfig& c) { return fmt_sizes(c.model.fe_layers); }},
      BOOL_KEY("use_light_se", model.flags.use_light_se),
      BOOL_KEY("use_fe_block", model.flags.use_fe_block),
      BOOL_KEY("use_cir", model.flags.use_cir),
      BOOL_KEY("fe_replace_fc", model.flags.fe_replace_fc),
      SIZE_KEY("batch_size", train.batch_size),
      DOUBLE_KEY("learning_rate", train.adam.learning_rate),
      DOUBLE_KEY("adam_beta1", train.adam.beta1),
      DOUBLE_KEY("adam_beta2", train.adam.beta2),
      DOUBLE_KEY("adam_eps", train.adam.eps),
      SIZE_KEY("max_epochs", train.max_epochs),
      SIZE_KEY("patience", train.patience),
      U64_KEY("seed", train.seed),
      DOUBLE_KEY("lambda1", train.loss.lambda1),
      DOUBLE_KEY("lambda2", train.loss.lambda2),
      DOUBLE_KEY("tau", train.loss.tau),
      STRING_KEY("data", data_path),
      STRING_KEY("catalog", catalog_path),
      DOUBLE_KEY("train_ratio", train_ratio),
      DOUBLE_KEY("val_ratio", val_ratio),
      U64_KEY("split_seed", split_seed),
      SIZE_KEY("eval_batch", eval_batch),
      SIZE_KEY("synthetic_users", synthetic.num_users),
      SIZE_KEY("synthetic_items", synthetic.num_items),
      SIZE_KEY("synthetic_rows", synthetic.num_rows),
      SIZE_KEY("synthetic_rank", synthetic.latent_rank),
      SIZE_KEY("synthetic_interests", synthetic.interests),
      DOUBLE_KEY("synthetic_noise", synthetic.noise),
      DOUBLE_KEY("synthetic_positive_rate", synthetic.positive_rate),
      U64_KEY("synthetic_seed", synthetic.seed),
      Key{"bench_ks", [](RunConfig& c, const std::string& v) { c.bench.ks = parse_sizes("bench_ks", v); },
          [](const RunConfig& c) { return fmt_sizes(c.bench.ks); }},
      SIZE_KEY("bench_repetitions", bench.repetitions),
      SIZE_KEY("bench_warmup", bench.warmup),
      U64_KEY("bench_seed", bench.seed),
      Key{"threads", [](RunConfig& c, const std::string& v) { c.threads = parse_number<int>("threads", v); },
          [](const RunConfig& c) { return fmt_int(c.threads); }},
  };
  return keys;
}

#undef SIZE_KEY
#undef U64_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY
#undef STRING_KEY

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

void RunConfig::validate() const {
  schema.validate();
  train.validate();
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("train_ratio must be in (0, 1)");
  if (!(val_ratio > 0.0 && val_ratio < 1.0)) throw ConfigError("val_ratio must be in (0, 1)");
  if (eval_batch == 0) throw ConfigError("eval_batch must be positive");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  Model probe(schema, model);
  (void)probe;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.name);
  return out;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : registry()) {
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  }
  std::string valid;
  for (const auto& name : config_keys()) valid += (valid.empty() ? "" : ", ") + name;
  throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid);
}

void apply_assignment(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  apply_setting(config, trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)));
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[' && line.find('=') == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": tables are not supported, keys are flat");
    }
    if (line.find('=') == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    apply_assignment(base, line);
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  if (!std::filesystem::exists(path)) throw DataError("config file not found: " + path.string());
  return parse_config(read_file(path), std::move(base));
}

std::string render_config(const RunConfig& config) {
  std::string out;
  for (const auto& k : registry()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

}  // namespace inttower
