#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tdmcl/evolution.hpp"
#include "tdmcl/plasticity.hpp"
#include "tdmcl/tasks.hpp"
#include "tdmcl/topology.hpp"

namespace tdmcl {

enum class RunMode { kFull, kNoInhibition, kDirectTraining, kDirectPruning };

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& text);

enum class LrSchedule { kConstant, kCosine };

struct TrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 30;
  int fine_tune_epochs = 10;
  double grad_clip = 5.0;
  double adapter_lr_scale = 0.01;  // adapter learning rate relative to the column's
  LrSchedule schedule = LrSchedule::kCosine;
};

struct EvolutionConfig {
  int episodes = 8;
  int burst_epochs = 5;
  double gamma = 0.5;
  NormalizationScope h_l_scope = NormalizationScope::kRow;
};

struct PlasticityConfig {
  double alpha = 0.5;
  int maturity = 3;  // N
  double quantile = 0.8;
  int probe_size = 256;
  HebbianScope hebbian_scope = HebbianScope::kLayer;
  int cadence = 1;  // prune after every `cadence`-th completed later task
};

struct RunSection {
  RunMode mode = RunMode::kFull;
  std::uint64_t seed = 1;
  int tasks = 9;
};

struct RunConfig {
  SuiteConfig suite;
  NetConfig net;
  TrainConfig train;
  EvolutionConfig evolution;
  PlasticityConfig plasticity;
  RunSection run;

  bool operator==(const RunConfig& other) const;
};

// Parses `key = value` lines (with `#` comments) on top of the defaults.
// Overrides are `key=value` strings applied afterwards.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                       const std::string& source = "config");
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Every key with its current value, one per line; parseable by parse_config.
std::string echo_config(const RunConfig& cfg);

// All known keys in echo order.
std::vector<std::string> config_keys();

void validate(const RunConfig& cfg);

}  // namespace tdmcl
