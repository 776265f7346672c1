#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "inttower/config.hpp"
#include "inttower/features.hpp"
#include "inttower/model.hpp"
#include "inttower/objectives.hpp"
#include "inttower/trainer.hpp"

// Pipelines shared by the command-line tool and the acceptance suite.
namespace inttower {

struct PreparedData {
  RawTable raw;
  Vocabulary vocab;  // built from the training part (train + validation rows)
  Dataset train;
  Dataset val;
  Dataset test;
};

// Seeded split: train_ratio of the rows form the training part, of which
// val_ratio is held out for validation; the rest is test.
PreparedData prepare_data(const RunConfig& config);
PreparedData prepare_data(const RunConfig& config, RawTable raw);

struct RunOutcome {
  TrainResult result;
  Metrics val;
  Metrics test;
};

RunOutcome run_training(const RunConfig& config, const PreparedData& data,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

// Run directory layout:
//   config.toml        resolved configuration
//   vocab.tsv          feature vocabulary
//   checkpoint.bin     best parameters
//   metrics.jsonl      one line per training epoch
//   test_metrics.json  {"auc","logloss","relaimpr_vs_base"} on the test split
void write_run(const std::filesystem::path& dir, const RunConfig& config, const Vocabulary& vocab,
               const RunOutcome& outcome);

struct LoadedRun {
  RunConfig config;
  Vocabulary vocab;
  ParamStore params;
};

// Reads config, vocabulary and checkpoint back; the checkpoint must match
// the config's schema.
LoadedRun load_run(const std::filesystem::path& dir);

std::string metrics_log(const std::vector<EpochLog>& log);

// Bench rows for decoupled IntTower and single-tower scoring with the
// configured widths, on fresh parameters and config.synthetic.num_items items.
std::vector<LatencyRow> latency_contrast(const RunConfig& config);

}  // namespace inttower
