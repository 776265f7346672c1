#include "inttower/experiment.hpp"

#include <fstream>

#include "inttower/checkpoint.hpp"
#include "inttower/errors.hpp"
#include "inttower/item_index.hpp"
#include "inttower/serving.hpp"

namespace inttower {

namespace fs = std::filesystem;

PreparedData prepare_data(const RunConfig& config) {
  if (config.data_path.empty()) throw ConfigError("no data file configured (key 'data')");
  if (!fs::exists(config.data_path)) throw DataError("data file not found: " + config.data_path);
  return prepare_data(config, read_csv(config.data_path, config.schema));
}

PreparedData prepare_data(const RunConfig& config, RawTable raw) {
  PreparedData out;
  out.raw = std::move(raw);
  const Split outer = split(out.raw.size(), config.train_ratio, config.split_seed);
  const Split inner = split(outer.train.size(), 1.0 - config.val_ratio, config.split_seed + 1);
  std::vector<std::size_t> train_rows, val_rows;
  for (std::size_t i : inner.train) train_rows.push_back(outer.train[i]);
  for (std::size_t i : inner.test) val_rows.push_back(outer.train[i]);
  if (train_rows.empty() || val_rows.empty() || outer.test.empty()) {
    throw DataError("data file has too few rows (" + std::to_string(out.raw.size()) + ") for a train/validation/test split");
  }
  out.vocab = build_vocabulary(config.schema, out.raw, outer.train);
  out.train = encode(config.schema, out.vocab, out.raw, train_rows);
  out.val = encode(config.schema, out.vocab, out.raw, val_rows);
  out.test = encode(config.schema, out.vocab, out.raw, outer.test);
  return out;
}

RunOutcome run_training(const RunConfig& config, const PreparedData& data,
                        const std::function<void(const EpochLog&)>& on_epoch) {
  Model model(config.schema, config.model);
  RunOutcome out;
  out.result = train(model, data.vocab, data.train, data.val, config.train, on_epoch);
  out.val = evaluate(model, out.result.best, data.val, config.eval_batch).metrics;
  out.test = evaluate(model, out.result.best, data.test, config.eval_batch).metrics;
  return out;
}

std::string metrics_log(const std::vector<EpochLog>& log) {
  std::string out;
  for (const auto& e : log) out += e.to_json() + "\n";
  return out;
}

void write_run(const fs::path& dir, const RunConfig& config, const Vocabulary& vocab, const RunOutcome& outcome) {
  fs::create_directories(dir);
  write_file(dir / "config.toml", render_config(config));
  vocab.save(dir / "vocab.tsv");
  Checkpoint ckpt{config.schema.hash(), render_config(config), outcome.result.best};
  save_checkpoint(dir / "checkpoint.bin", ckpt);
  write_file(dir / "metrics.jsonl", metrics_log(outcome.result.log));
  write_file(dir / "test_metrics.json", outcome.test.to_json() + "\n");
}

LoadedRun load_run(const fs::path& dir) {
  for (const char* name : {"config.toml", "vocab.tsv", "checkpoint.bin"}) {
    if (!fs::exists(dir / name)) throw DataError("run directory " + dir.string() + " has no " + name);
  }
  LoadedRun run;
  run.config = load_config(dir / "config.toml");
  run.vocab = Vocabulary::load(dir / "vocab.tsv", run.config.schema);
  Checkpoint ckpt = load_checkpoint(dir / "checkpoint.bin");
  if (ckpt.schema_hash != run.config.schema.hash()) throw FormatError("checkpoint schema does not match config.toml");
  run.params = std::move(ckpt.params);
  return run;
}

// Latency of decoupled IntTower serving vs single-tower serving with the
// same layer widths, on freshly initialized parameters.
std::vector<LatencyRow> latency_contrast(const RunConfig& cfg) {
  Vocabulary vocab(cfg.schema);
  std::vector<std::string> user_values;
  for (std::size_t f = 0; f < cfg.schema.user_fields.size(); ++f) {
    user_values.push_back("u" + std::to_string(f));
    vocab.add(f, user_values.back());
  }
  ItemCatalog catalog;
  const std::size_t m = cfg.schema.user_fields.size();
  for (std::size_t i = 0; i < cfg.synthetic.num_items; ++i) {
    catalog.ids.push_back(i + 1);
    std::vector<std::string> values{std::to_string(i + 1)};
    for (std::size_t f = 1; f < cfg.schema.item_fields.size(); ++f) values.push_back("v" + std::to_string(i % 7));
    for (std::size_t f = 0; f < values.size(); ++f) vocab.add(m + f, values[f]);
    catalog.values.push_back(std::move(values));
  }

  ModelConfig two = cfg.model;
  two.kind = ModelKind::kIntTower;
  ModelConfig one = cfg.model;
  one.kind = ModelKind::kSingleTower;
  Model decoupled(cfg.schema, two), single(cfg.schema, one);
  ParamStore p_dec, p_single;
  decoupled.init(p_dec, vocab, cfg.train.seed);
  single.init(p_single, vocab, cfg.train.seed);

  ItemIndex index = export_items(decoupled, p_dec, vocab, catalog);
  EncodedCatalog enc = encode_catalog(cfg.schema, vocab, catalog);
  DecoupledScorer s_dec(decoupled, p_dec, vocab, index);
  SingleTowerScorer s_single(single, p_single, vocab, enc);

  auto rows = bench_scorer("inttower", s_dec, user_values, catalog.ids, cfg.bench);
  auto rows_single = bench_scorer("singletower", s_single, user_values, catalog.ids, cfg.bench);
  rows.insert(rows.end(), rows_single.begin(), rows_single.end());
  return rows;
}

}  // namespace inttower
