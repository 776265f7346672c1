#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "inttower/bench.hpp"
#include "inttower/checkpoint.hpp"
#include "inttower/config.hpp"
#include "inttower/errors.hpp"
#include "inttower/experiment.hpp"
#include "inttower/item_index.hpp"
#include "inttower/kernels.hpp"
#include "inttower/serving.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace inttower;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string run_dir;
  std::string model;
  std::string data;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, bool needs_run_dir = true) {
  cmd->add_option("-c,--config", c.config_path, "flat key = value config file");
  cmd->add_option("--set", c.sets, "override a config key (key=value), repeatable");
  auto* opt = cmd->add_option("-r,--run-dir", c.run_dir, "run directory for outputs");
  if (needs_run_dir) opt->required();
  cmd->add_option("--model", c.model, "inttower | twotower | singletower");
  cmd->add_option("--data", c.data, "CSV data file");
  cmd->add_option("--seed", c.seed, "training seed");
}

// Config file, then --set overrides, then dedicated flags.
RunConfig resolve(const Common& c, RunConfig base = {}) {
  RunConfig cfg = c.config_path.empty() ? std::move(base) : load_config(c.config_path, std::move(base));
  for (const auto& s : c.sets) apply_assignment(cfg, s);
  if (!c.model.empty()) cfg.model.kind = parse_model_kind(c.model);
  if (!c.data.empty()) cfg.data_path = c.data;
  if (c.seed) cfg.train.seed = *c.seed;
  cfg.validate();
  kernels::set_num_threads(cfg.threads);
  return cfg;
}

void echo_config(const fs::path& dir, const RunConfig& cfg) {
  fs::create_directories(dir);
  write_file(dir / "config.toml", render_config(cfg));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

ItemCatalog load_catalog(const RunConfig& cfg) {
  if (!cfg.catalog_path.empty()) {
    if (!fs::exists(cfg.catalog_path)) throw DataError("catalog file not found: " + cfg.catalog_path);
    return read_catalog(cfg.catalog_path, cfg.schema);
  }
  if (cfg.data_path.empty()) throw ConfigError("no catalog or data file configured");
  if (!fs::exists(cfg.data_path)) throw DataError("data file not found: " + cfg.data_path);
  return catalog_from_table(cfg.schema, read_csv(cfg.data_path, cfg.schema));
}

int cmd_gen_data(const Common& c, const std::string& out_opt) {
  RunConfig cfg = resolve(c);
  const fs::path out = out_opt.empty() ? fs::path(c.run_dir) / "data.csv" : fs::path(out_opt);
  fs::create_directories(c.run_dir);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  generate_synthetic(cfg.schema, cfg.synthetic, out);
  cfg.data_path = out.string();
  echo_config(c.run_dir, cfg);
  std::cout << "wrote " << cfg.synthetic.num_rows << " rows to " << out.string() << "\n";
  return 0;
}

int cmd_train(const Common& c) {
  RunConfig cfg = resolve(c);
  PreparedData data = prepare_data(cfg);
  fs::create_directories(c.run_dir);
  RunOutcome outcome = run_training(cfg, data, [](const EpochLog& e) { std::cerr << e.to_json() << "\n"; });
  write_run(c.run_dir, cfg, data.vocab, outcome);
  std::cout << outcome.test.to_json() << "\n";
  return 0;
}

int cmd_eval(const Common& c) {
  LoadedRun run = load_run(c.run_dir);
  RunConfig cfg = run.config;
  if (!c.data.empty()) cfg.data_path = c.data;
  kernels::set_num_threads(cfg.threads);
  PreparedData data = prepare_data(cfg);
  if (!(data.vocab == run.vocab)) throw DataError("data file does not reproduce the run's vocabulary");
  Model model(cfg.schema, cfg.model);
  nlohmann::ordered_json j;
  j["val"] = nlohmann::ordered_json::parse(evaluate(model, run.params, data.val, cfg.eval_batch).metrics.to_json());
  j["test"] = nlohmann::ordered_json::parse(evaluate(model, run.params, data.test, cfg.eval_batch).metrics.to_json());
  write_file(fs::path(c.run_dir) / "eval_metrics.json", j.dump() + "\n");
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_export(const Common& c, const std::string& catalog, const std::string& out_opt) {
  LoadedRun run = load_run(c.run_dir);
  if (!catalog.empty()) run.config.catalog_path = catalog;
  if (!c.data.empty()) run.config.data_path = c.data;
  Model model(run.config.schema, run.config.model);
  ItemIndex index = export_items(model, run.params, run.vocab, load_catalog(run.config), &std::cerr);
  const fs::path out = out_opt.empty() ? fs::path(c.run_dir) / "items.itix" : fs::path(out_opt);
  index.save(out);
  std::cout << "exported " << index.size() << " items (" << index.heads() << "x" << index.head_dim() << ") to "
            << out.string() << "\n";
  return 0;
}

int cmd_score(const Common& c, const std::string& user, const std::string& candidates, const std::string& index_opt) {
  LoadedRun run = load_run(c.run_dir);
  if (!c.data.empty()) run.config.data_path = c.data;
  Model model(run.config.schema, run.config.model);
  ScoreRequest req;
  req.user_values = split_list(user);
  for (const auto& s : split_list(candidates)) req.candidates.push_back(parse_item_id(s));
  if (req.candidates.empty()) throw DataError("no candidates given");
  ScoreResponse resp;
  if (model.decoupled()) {
    const fs::path path = index_opt.empty() ? fs::path(c.run_dir) / "items.itix" : fs::path(index_opt);
    if (!fs::exists(path)) throw DataError("item index not found: " + path.string() + " (run export-items first)");
    ItemIndex index = ItemIndex::load(path);
    DecoupledScorer scorer(model, run.params, run.vocab, index);
    resp = scorer.score(req);
  } else {
    EncodedCatalog enc = encode_catalog(run.config.schema, run.vocab, load_catalog(run.config));
    SingleTowerScorer scorer(model, run.params, run.vocab, enc);
    resp = scorer.score(req);
  }
  std::cout << resp.to_json() << "\n";
  return 0;
}

int cmd_bench(const Common& c) {
  RunConfig cfg = resolve(c);
  auto rows = latency_contrast(cfg);
  echo_config(c.run_dir, cfg);
  std::ofstream csv(fs::path(c.run_dir) / "bench.csv");
  write_latency_csv(csv, rows);
  write_latency_csv(std::cout, rows);
  return 0;
}

int cmd_gradcheck(const std::string& which, const std::string& run_dir, std::uint64_t seed) {
  std::vector<ModelKind> kinds;
  if (which == "all") {
    kinds = {ModelKind::kTwoTower, ModelKind::kSingleTower, ModelKind::kIntTower};
  } else {
    kinds = {parse_model_kind(which)};
  }
  bool ok = true;
  std::string report;
  for (ModelKind k : kinds) {
    GradCheckReport r = gradcheck(k, seed);
    ok = ok && r.passed;
    report += r.to_json() + "\n";
  }
  std::cout << report;
  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    write_file(fs::path(run_dir) / "gradcheck.jsonl", report);
  }
  return ok ? 0 : 1;
}

struct Variant {
  std::string name;
  ArchFlags flags;
};

int cmd_ablate(const Common& c) {
  RunConfig base = resolve(c);
  if (base.model.kind != ModelKind::kIntTower) throw ConfigError("ablate needs model = inttower");
  PreparedData data = prepare_data(base);
  const ArchFlags full = base.model.flags;
  std::vector<Variant> variants = {
      {"full", full},
      {"no_lightse", {false, full.use_fe_block, full.use_cir, false}},
      {"no_feblock", {full.use_light_se, false, full.use_cir, false}},
      {"no_cir", {full.use_light_se, full.use_fe_block, false, false}},
      {"fe_to_fc", {full.use_light_se, false, full.use_cir, true}},
  };
  fs::create_directories(c.run_dir);
  std::optional<double> full_auc;
  std::string summary;
  for (const auto& v : variants) {
    RunConfig cfg = base;
    cfg.model.flags = v.flags;
    std::cerr << "variant " << v.name << "\n";
    RunOutcome outcome = run_training(cfg, data, [](const EpochLog& e) { std::cerr << e.to_json() << "\n"; });
    if (full_auc) outcome.test.relaimpr = relaimpr(outcome.test.auc, *full_auc);
    else full_auc = outcome.test.auc;
    write_run(fs::path(c.run_dir) / v.name, cfg, data.vocab, outcome);
    nlohmann::ordered_json j;
    j["variant"] = v.name;
    const auto metrics = nlohmann::ordered_json::parse(outcome.test.to_json());
    for (auto& [k, val] : metrics.items()) j[k] = val;
    summary += j.dump() + "\n";
    std::cout << j.dump() << std::endl;
  }
  echo_config(c.run_dir, base);
  write_file(fs::path(c.run_dir) / "ablation.jsonl", summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IntTower pre-ranking model: data generation, training, evaluation and serving"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, export_c, score_c, bench_c, ablate_c;
  std::string gen_out, catalog, export_out, user, candidates, index_path, gc_model = "all", gc_dir;
  std::uint64_t gc_seed = 1;

  auto* gen = app.add_subcommand("gen-data", "write a planted synthetic CSV");
  add_common(gen, gen_c);
  gen->add_option("-o,--out", gen_out, "CSV path (default <run-dir>/data.csv)");

  auto* trn = app.add_subcommand("train", "train a model and write a run directory");
  add_common(trn, train_c);

  auto* ev = app.add_subcommand("eval", "re-evaluate a run's checkpoint on its validation and test splits");
  ev->add_option("-r,--run-dir", eval_c.run_dir, "run directory written by train")->required();
  ev->add_option("--data", eval_c.data, "CSV data file (default: the run's)");

  auto* exp = app.add_subcommand("export-items", "write the item index for a decoupled model");
  exp->add_option("-r,--run-dir", export_c.run_dir, "run directory written by train")->required();
  exp->add_option("--catalog", catalog, "item catalog CSV (default: items of the data file)");
  exp->add_option("--data", export_c.data, "CSV data file");
  exp->add_option("-o,--out", export_out, "index path (default <run-dir>/items.itix)");

  auto* sc = app.add_subcommand("score", "score candidates for one user");
  sc->add_option("-r,--run-dir", score_c.run_dir, "run directory written by train")->required();
  sc->add_option("--user", user, "comma-separated user field values")->required();
  sc->add_option("--candidates", candidates, "comma-separated item ids")->required();
  sc->add_option("--index", index_path, "item index (default <run-dir>/items.itix)");
  sc->add_option("--data", score_c.data, "CSV data file (single-tower candidate features)");

  auto* bn = app.add_subcommand("bench", "latency of decoupled vs single-tower scoring over candidate counts");
  add_common(bn, bench_c);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check on tiny models");
  gc->add_option("--model", gc_model, "inttower | twotower | singletower | all");
  gc->add_option("-r,--run-dir", gc_dir, "write the report here");
  gc->add_option("--seed", gc_seed, "initialization seed");

  auto* ab = app.add_subcommand("ablate", "train the full model and its component ablations");
  add_common(ab, ablate_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::kConfig);
  }

  try {
    if (*gen) return cmd_gen_data(gen_c, gen_out);
    if (*trn) return cmd_train(train_c);
    if (*ev) return cmd_eval(eval_c);
    if (*exp) return cmd_export(export_c, catalog, export_out);
    if (*sc) return cmd_score(score_c, user, candidates, index_path);
    if (*bn) return cmd_bench(bench_c);
    if (*gc) return cmd_gradcheck(gc_model, gc_dir, gc_seed);
    if (*ab) return cmd_ablate(ablate_c);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
