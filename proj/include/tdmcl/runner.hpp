#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tdmcl/config.hpp"
#include "tdmcl/evolution.hpp"
#include "tdmcl/feedback.hpp"
#include "tdmcl/rng.hpp"
#include "tdmcl/tasks.hpp"
#include "tdmcl/topology.hpp"

namespace tdmcl {

enum class Phase { kGrow, kEvolve, kTrain, kPrune };
std::string to_string(Phase p);
Phase parse_phase(const std::string& text);

struct PhaseStep {
  Phase phase = Phase::kGrow;
  int task = 1;
  bool operator==(const PhaseStep&) const = default;
};

// Ordered phase list of a run: per task grow, then (evolve), train, (prune).
std::vector<PhaseStep> phase_schedule(const RunConfig& cfg);

// Whether a mode uses earlier columns / pruning at all.
bool uses_long_range(RunMode mode);
bool uses_pruning(RunMode mode);

// Epochs the train phase of `task` runs for under `cfg`.
int train_phase_epochs(const RunConfig& cfg, int task);

struct ChoiceRow {
  int task = 0;
  int dest_block = 0;
  int source_task = 0;
  int option = 0;
  double p = 0.0;
  int h_n = 0;
  double h_l = 0.0;
};

// One ledger entry per phase boundary.
struct PhaseRecord {
  int index = 0;
  Phase phase = Phase::kGrow;
  int task = 0;
  std::vector<std::pair<int, double>> metrics;  // learned tasks
  std::optional<double> average;
  Index local_total = 0;
  Index local_active = 0;
  Index long_range_edges = 0;
  Index long_range_params = 0;
  double long_range_sparsity = 1.0;
  std::vector<BlockCensus> blocks;
  std::vector<std::pair<int, std::string>> choice_digests;
  // evolve
  std::vector<double> episode_losses;
  std::vector<WiringChoice> wiring;
  std::vector<ChoiceRow> choices;
  // train
  std::optional<double> train_loss;
  int epochs = 0;
  // prune
  std::vector<PruneRow> pruning;
};

std::string record_to_json(const PhaseRecord& r);
PhaseRecord record_from_json(const std::string& line);
std::vector<PhaseRecord> read_ledger(const std::string& path);

// Everything needed to continue a run at the next phase boundary.
struct RunState {
  RunConfig config;
  std::size_t next_phase = 0;
  int prune_rounds = 0;
  ColumnGraph graph;
  std::map<int, ChoiceMatrix> choices;  // finalized, per task >= 2
  Rng master;
  std::uint64_t ledger_records = 0;
  std::uint64_t ledger_bytes = 0;
};

std::string encode_checkpoint(const RunState& s);
RunState decode_checkpoint(std::string_view bytes, const std::string& what);
void write_checkpoint(const std::string& path, const RunState& s);
RunState read_checkpoint(const std::string& path);

// Fraction of finalized choice rows that decode to "no connection"; 1 when no
// rows exist.
double finalized_sparsity(const std::map<int, ChoiceMatrix>& choices);

// Loads out_dir/suite/task_<id>.tdmd when present, otherwise generates the
// tasks from the config. Adopting stored files overwrites cfg.suite with
// their metadata.
std::vector<Dataset> load_or_generate_suite(SuiteConfig& cfg, int tasks, const std::string& out_dir);
void write_suite(const std::vector<Dataset>& suite, const SuiteConfig& cfg, const std::string& dir);

struct RunOptions {
  std::string out_dir;
  int stop_after = -1;              // phases to execute in this invocation; -1 = all
  std::ostream* progress = nullptr;  // one line per phase
  int threads = 1;
};

struct RunOutcome {
  bool complete = false;
  std::size_t phases_executed = 0;
  RunState state;
};

RunOutcome run_continual(const RunConfig& cfg, const RunOptions& opts);
RunOutcome resume_run(const RunOptions& opts);

struct FineTuneResult {
  double before = 0.0;
  double after = 0.0;
  double delta() const { return after - before; }
};

// Retrains column `task` (surviving weights and incoming adapters) for
// `epochs`; masks stay frozen. Counts as a training run of its blocks.
FineTuneResult fine_tune(RunState& state, const std::vector<Dataset>& suite, int task, int epochs,
                         int threads = 1);

// Test metric of one task on a state.
double evaluate_task(RunState& state, const std::vector<Dataset>& suite, int task);

// Kernel table over every column that has a later column, with H measured on
// each task's probe.
std::vector<KernelStat> kernel_table(RunState& state, const std::vector<Dataset>& suite);

// Writes summary.csv, ledger.csv, pruning.csv and choices.csv from the ledger
// in out_dir, plus kernels.csv (headers only unless `kernels` is given).
void write_reports(const std::string& out_dir, const std::vector<PhaseRecord>& ledger,
                   const std::vector<KernelStat>* kernels);

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitIo = 4;

}  // namespace tdmcl
