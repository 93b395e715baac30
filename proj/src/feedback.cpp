#include "tdmcl/feedback.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

namespace tdmcl {

Split probe_subset(const Split& split, int size, std::uint64_t seed, int task) {
  const Index n = split.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = Rng::derive(seed, 0x70726f6265ULL ^ static_cast<std::uint64_t>(task));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const Index m = std::min<Index>(size, n);
  order.resize(static_cast<std::size_t>(m));
  std::sort(order.begin(), order.end());
  Split out;
  out.inputs.resize(split.inputs.rows(), m);
  out.states.resize(split.states.rows(), m);
  out.targets.resize(split.targets.rows(), m);
  for (Index i = 0; i < m; ++i) {
    const Index s = order[i];
    out.inputs.col(i) = split.inputs.col(s);
    if (out.states.rows()) out.states.col(i) = split.states.col(s);
    if (out.targets.rows()) out.targets.col(i) = split.targets.col(s);
    if (!split.labels.empty()) out.labels.push_back(split.labels[s]);
  }
  return out;
}

ColumnHebbian column_hebbian(ColumnGraph& graph, int task, const Split& probe, double alpha,
                             HebbianScope scope) {
  const int steps = graph.config.steps;
  const float a = static_cast<float>(alpha);
  std::map<int, ColumnOutput> outs;
  for (int t : graph.ancestors(task)) {
    SourceMap sources;
    const auto incoming = graph.incoming(t);
    for (const LongRangeEdge* e : incoming)
      sources[{e->source_task, e->source_block}] = &outs.at(e->source_task).spikes[e->source_block - 1];
    const MatrixF st = t == task ? probe.states
                                 : MatrixF::Zero(graph.column(t).spec.state_dim, probe.size());
    outs[t] = column_forward(graph, t, probe.inputs, st, incoming, sources, SpikeMode::kHard,
                             t == task);
  }
  // A static input replayed for every step has trace x * sum_s alpha^s.
  float static_factor = 0.0f;
  for (int s = 0; s < steps; ++s) static_factor = a * static_factor + 1.0f;

  ColumnHebbian h;
  TaskColumn& col = graph.column(task);
  for (int b = 0; b < kBlocks; ++b) {
    BlockModule& m = col.blocks[b];
    const MatrixF post1 = window_trace<float>(m.plif1.last_spikes(), steps, a);
    const MatrixF post2 = window_trace<float>(m.plif2.last_spikes(), steps, a);
    const MatrixF pre_in1 = b == 0 ? MatrixF(m.conv1.cached_columns() * static_factor)
                                   : window_trace<float>(m.conv1.cached_columns(), steps, a);
    const MatrixF pre_sc = b == 0 ? MatrixF(m.shortcut.cached_columns() * static_factor)
                                  : window_trace<float>(m.shortcut.cached_columns(), steps, a);
    const MatrixF pre2 = window_trace<float>(m.conv2.cached_columns(), steps, a);
    h[b][0] = hebbian_raw_shared<float>(post1, pre_in1);
    h[b][1] = hebbian_raw_shared<float>(post2, pre2);
    h[b][2] = hebbian_raw_shared<float>(post2, pre_sc);
  }
  if (scope == HebbianScope::kLayer) {
    for (auto& block : h)
      for (auto& layer : block) normalize01(layer);
  } else {
    float lo = std::numeric_limits<float>::infinity();
    float hi = -lo;
    for (const auto& block : h)
      for (const auto& layer : block) {
        lo = std::min(lo, layer.minCoeff());
        hi = std::max(hi, layer.maxCoeff());
      }
    for (auto& block : h)
      for (auto& layer : block) {
        if (hi > lo) layer = (layer.array() - lo) / (hi - lo);
        else layer.setZero();
      }
  }
  return h;
}

std::vector<PruneRow> prune_column(ColumnGraph& graph, int task, const ColumnHebbian& h,
                                   const std::array<double, kBlocks>& e, int maturity,
                                   double quantile, int round) {
  std::vector<PruneRow> rows;
  TaskColumn& col = graph.column(task);
  for (int b = 0; b < kBlocks; ++b) {
    BlockModule& m = col.blocks[b];
    PruneRow row;
    row.round = round;
    row.task = task;
    row.block = b + 1;
    row.e = e[b];
    double v_weighted = 0.0, h_sum = 0.0;
    Index h_count = 0;
    auto layers = m.layers();
    for (int l = 0; l < 3; ++l) {
      LayerParams<float>& p = layers[l]->params();
      const MatrixF v = threshold_coeffs(h[b][l], e[b], m.training_runs, maturity);
      h_sum += h[b][l].cast<double>().sum();
      h_count += h[b][l].size();
      const PruneOutcome o = inhibit_and_prune(p, v, quantile);
      row.active_before += o.active_before;
      row.active_after += o.active_after;
      v_weighted += o.mean_v * static_cast<double>(o.active_before);
    }
    row.mean_v = row.active_before ? v_weighted / static_cast<double>(row.active_before) : 0.0;
    row.mean_h = h_count ? h_sum / static_cast<double>(h_count) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<KernelStat> column_kernel_stats(const ColumnGraph& graph, int task,
                                            const ColumnHebbian& h) {
  std::vector<KernelStat> out;
  const TaskColumn& col = graph.column(task);
  for (int b = 0; b < kBlocks; ++b) {
    const BlockModule& m = col.blocks[b];
    const std::array<const Conv2d<float>*, 2> convs = {&m.conv1, &m.conv2};
    const std::array<const char*, 2> names = {"conv1", "conv2"};
    for (int l = 0; l < 2; ++l) {
      auto rows = kernel_stats<float>(convs[l]->params(), h[b][l], convs[l]->geometry().input.channels);
      for (auto& r : rows) {
        r.task = task;
        r.block = b + 1;
        r.layer = names[l];
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

}  // namespace tdmcl
