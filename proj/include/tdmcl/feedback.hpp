#pragma once

#include <array>
#include <vector>

#include "tdmcl/plasticity.hpp"
#include "tdmcl/tasks.hpp"
#include "tdmcl/topology.hpp"

namespace tdmcl {

// Normalized Hebbian matrices of one column, indexed [block][layer] with
// layers ordered conv1, conv2, shortcut.
using ColumnHebbian = std::array<std::array<MatrixF, 3>, kBlocks>;

// Runs `probe` through column `task` (and the columns feeding it) and turns
// the end-of-window pre/post spike traces of every conv layer into H.
// Weight-shared kernels average the outer product over positions.
ColumnHebbian column_hebbian(ColumnGraph& graph, int task, const Split& probe, double alpha,
                             HebbianScope scope);

// A fixed probe subset of a split.
Split probe_subset(const Split& split, int size, std::uint64_t seed, int task);

struct PruneRow {
  int round = 0;
  int task = 0;
  int block = 0;
  Index active_before = 0;
  Index active_after = 0;
  double mean_v = 0.0;  // over weights active before the round
  double mean_h = 0.0;  // over all weights of the block
  double e = 0.0;
};

// Inhibits and prunes every conv layer of column `task`; generality per block
// is given in `e` (index 0 = block 1).
std::vector<PruneRow> prune_column(ColumnGraph& graph, int task, const ColumnHebbian& h,
                                   const std::array<double, kBlocks>& e, int maturity,
                                   double quantile, int round);

// Per-kernel (mean H, pruned fraction) rows for conv1/conv2 of every block of
// column `task`.
std::vector<KernelStat> column_kernel_stats(const ColumnGraph& graph, int task,
                                            const ColumnHebbian& h);

}  // namespace tdmcl
