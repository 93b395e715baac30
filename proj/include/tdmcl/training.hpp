#pragma once

#include <map>
#include <utility>
#include <vector>

#include "tdmcl/config.hpp"
#include "tdmcl/rng.hpp"
#include "tdmcl/tasks.hpp"
#include "tdmcl/topology.hpp"

namespace tdmcl {

// Learning rate of `epoch` (0-based) out of `epochs`.
double scheduled_lr(const TrainConfig& cfg, int epoch, int epochs, bool constant);

// Trains column `task` (plus `incoming` adapters) for `epochs` epochs on
// `split`. Long-range sources are read from `cache`. Returns the mean loss of
// the last epoch.
double train_epochs(ColumnGraph& graph, int task, const std::vector<LongRangeEdge*>& incoming,
                    const Split& split, const SourceCache& cache, const TrainConfig& cfg,
                    int epochs, bool constant_lr, Rng& rng);

// Persistent-optimizer variant used by evolution episodes, which swap the
// incoming edge set between bursts but keep momentum per adapter.
double train_epochs(ColumnTrainer& trainer, const std::vector<LongRangeEdge*>& incoming,
                    int task, int steps, const Split& split, const SourceCache& cache,
                    const TrainConfig& cfg, int epochs, bool constant_lr, Rng& rng);

// Mean loss over a split, evaluated in batches.
double mean_loss(ColumnGraph& graph, int task, const std::vector<LongRangeEdge*>& incoming,
                 const Split& split, const SourceCache& cache, Index batch_size = 250);

// Source spikes required by `incoming`, gathered from the cache for `samples`.
std::map<std::pair<int, int>, MatrixF> gather_sources(const std::vector<LongRangeEdge*>& incoming,
                                                      const SourceCache& cache,
                                                      const std::vector<Index>& samples, int steps);

// Tasks whose block outputs feed `incoming`, ascending and unique.
std::vector<int> source_tasks(const std::vector<LongRangeEdge*>& incoming);

// Test-split metric of each listed task. Runs up to `threads` workers on
// private copies of the graph; results are in input order.
std::vector<double> evaluate_tasks(const ColumnGraph& graph, const std::vector<int>& tasks,
                                   const std::vector<Dataset>& suite, double command_tolerance,
                                   int threads);

// TDMCL_THREADS, defaulting to the hardware concurrency.
int worker_threads();

}  // namespace tdmcl
