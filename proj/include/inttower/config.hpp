#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "inttower/bench.hpp"
#include "inttower/features.hpp"
#include "inttower/model.hpp"
#include "inttower/trainer.hpp"

namespace inttower {

// Everything a command needs. Rendered as a flat TOML-style file
// (`key = value`, `#` comments, strings quoted, lists in brackets).
struct RunConfig {
  FeatureSchema schema{{"user_id", "user_segment", "user_noise"}, {"item_id", "item_category", "item_noise"}};
  ModelConfig model;
  TrainConfig train;
  SyntheticConfig synthetic;
  BenchConfig bench;
  std::string data_path;
  std::string catalog_path;  // empty: distinct items of the data file
  double train_ratio = 0.8;  // train+validation share of all rows
  double val_ratio = 0.1;    // validation share of the training part
  std::uint64_t split_seed = 1;
  std::size_t eval_batch = 4096;
  int threads = 0;           // 0: OpenMP default

  void validate() const;
};

// Applies `key = value` lines on top of `base`. Unknown keys and malformed
// values raise ConfigError.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
// "key=value" as given on the command line.
void apply_assignment(RunConfig& config, const std::string& assignment);

// Canonical rendering of every key; parse_config(render_config(c)) == c.
std::string render_config(const RunConfig& config);
std::vector<std::string> config_keys();

}  // namespace inttower
