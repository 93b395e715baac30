#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tdmcl/binary_io.hpp"
#include "tdmcl/evolution.hpp"
#include "tdmcl/rng.hpp"
#include "tdmcl/snn/layers.hpp"
#include "tdmcl/snn/optimizer.hpp"
#include "tdmcl/snn/plif.hpp"
#include "tdmcl/tasks.hpp"

namespace tdmcl {

inline constexpr int kBlocks = 4;
inline constexpr std::array<int, kBlocks> kBaseWidths = {32, 64, 128, 256};

struct NetConfig {
  double width_factor = 0.25;
  int steps = 4;
  PlifConfig plif;
  double init_gain = 2.5;
  double adapter_gain = 0.05;
  bool weight_norm = true;
};

std::array<int, kBlocks> ladder_widths(double width_factor);

// One residual spiking block: conv3x3(stride 2) -> PLIF -> conv3x3 ->
// (+ 1x1 stride-2 shortcut) -> PLIF.
struct BlockModule {
  int task_id = 0;
  int index = 1;  // 1..4
  Shape input;
  Shape output;
  Conv2d<float> conv1;
  Conv2d<float> conv2;
  Conv2d<float> shortcut;
  PlifLayer<float> plif1;
  PlifLayer<float> plif2;
  int training_runs = 0;  // completed phases that updated this block

  std::string name() const {
    return "B" + std::to_string(index) + "^" + std::to_string(task_id);
  }
  std::array<const Conv2d<float>*, 3> layers() const { return {&conv1, &conv2, &shortcut}; }
  std::array<Conv2d<float>*, 3> layers() { return {&conv1, &conv2, &shortcut}; }

  // `static_input` means `in` holds one image per sample that is replayed at
  // every time step (direct encoding); otherwise `in` is time-major.
  MatrixF forward(const MatrixF& in, Index batch, int steps, bool static_input, SpikeMode mode,
                  bool keep);
};

struct LongRangeEdge {
  int source_task = 0;
  int source_block = 0;
  int dest_task = 0;
  int dest_block = 0;
  Shape source_shape;
  Shape dest_shape;
  Conv2d<float> adapter;  // 1x1 projection at source resolution

  std::string name() const;
  // Projects source spikes (time-major) onto the destination input grid.
  MatrixF forward(const MatrixF& source, Index images, bool keep);
};

struct TaskColumn {
  TaskSpec spec;
  std::array<BlockModule, kBlocks> blocks;
  LayerParams<float> head;  // outputs x (last-block channels + state_dim)

  int task_id() const { return spec.task_id; }
};

struct ColumnGraph {
  NetConfig config;
  std::vector<TaskColumn> columns;
  std::vector<LongRangeEdge> edges;

  int tasks() const { return static_cast<int>(columns.size()); }
  TaskColumn& column(int task);
  const TaskColumn& column(int task) const;
  std::vector<LongRangeEdge*> incoming(int task);
  // Tasks whose columns feed `task`, transitively, plus `task`; ascending.
  std::vector<int> ancestors(int task) const;
};

// Appends a fresh column for `spec` (task_id must be tasks() + 1).
void grow_task_column(ColumnGraph& graph, const TaskSpec& spec, Rng& rng);

LongRangeEdge make_edge(const ColumnGraph& graph, int dest_task, int dest_block, int source_task,
                        int source_block, Rng& rng);

// Materializes connect-choices for task `task`. Adapters come from `pool`
// when it holds one for the same endpoints, otherwise they are freshly
// initialized.
void wire_edges(ColumnGraph& graph, int task, const std::vector<WiringChoice>& choices, Rng& rng,
                const std::vector<LongRangeEdge>* pool = nullptr);

MatrixF merge_inputs(const MatrixF& native, const std::vector<MatrixF>& long_range);

// Graph must be a DAG in task order; throws WiringError otherwise.
void check_acyclic(const ColumnGraph& graph);

struct BlockCensus {
  int task = 0;
  int block = 0;
  Index total_weights = 0;
  Index active_weights = 0;
  double sparsity() const {
    return total_weights == 0 ? 0.0
                              : 1.0 - static_cast<double>(active_weights) / total_weights;
  }
};

struct Census {
  std::vector<BlockCensus> blocks;
  Index local_total = 0;
  Index local_active = 0;
  Index long_range_edges = 0;
  Index long_range_params = 0;
};

Census parameter_census(const ColumnGraph& graph);

// Block-1 input for a batch: (channels x batch*pixels) from sample columns.
MatrixF images_to_feature_map(const MatrixF& samples, const Shape& shape);

// Forward state of one column on one batch.
struct ColumnOutput {
  std::array<MatrixF, kBlocks> spikes;  // time-major block outputs
  MatrixF features;                     // rates (+ state)
  MatrixF outputs;                      // head outputs
};

// Source spikes keyed by (task, block).
using SourceMap = std::map<std::pair<int, int>, const MatrixF*>;

// Runs column `task` given its incoming edges and their source spikes.
ColumnOutput column_forward(ColumnGraph& graph, int task, const MatrixF& images,
                            const MatrixF& states, const std::vector<LongRangeEdge*>& incoming,
                            const SourceMap& sources, SpikeMode mode, bool keep);

// Evaluates `task` end to end, computing every ancestor column on the fly.
MatrixF predict(ColumnGraph& graph, int task, const Split& split, Index batch_size = 250);

// Per-sample spike cache of earlier columns' block outputs, stored as bytes.
class SourceCache {
 public:
  void build(ColumnGraph& graph, const std::vector<int>& tasks, const Split& split,
             Index batch_size = 250);
  bool empty() const { return maps_.empty(); }
  // Time-major float spikes for the given samples.
  MatrixF gather(int task, int block, const std::vector<Index>& samples, int steps) const;
  bool has(int task, int block) const { return maps_.count({task, block}) > 0; }

 private:
  struct Entry {
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> data;  // C x (n, t, p)
    int pixels = 0;
  };
  std::map<std::pair<int, int>, Entry> maps_;
  int steps_ = 0;
};

// Trainable parameters of one task phase, with aligned gradient and momentum
// buffers. Order: blocks 1..4 (conv1, conv2, shortcut), adapters, head.
class ColumnTrainer {
 public:
  // Adapters step with learning_rate * adapter_lr_scale.
  ColumnTrainer(ColumnGraph& graph, int task, std::vector<LongRangeEdge*> incoming,
                SgdConfig sgd, double grad_clip, double adapter_lr_scale = 1.0);

  // One SGD step on a batch. Returns the loss.
  double step(const MatrixF& images, const MatrixF& states, const SourceMap& sources,
              const std::vector<int>& labels, const MatrixF& targets);
  double loss(const MatrixF& images, const MatrixF& states, const SourceMap& sources,
              const std::vector<int>& labels, const MatrixF& targets);

  void set_incoming(std::vector<LongRangeEdge*> incoming);
  void set_learning_rate(double lr) {
    sgd_.learning_rate = lr;
    adapter_sgd_.learning_rate = lr * adapter_lr_scale_;
  }

 private:
  void zero_grads();
  void backward(const MatrixF& grad_out, const ColumnOutput& out);
  void apply();

  ColumnGraph& graph_;
  int task_;
  std::vector<LongRangeEdge*> incoming_;
  SgdConfig sgd_;
  SgdConfig adapter_sgd_;
  double adapter_lr_scale_;
  double grad_clip_;
  std::vector<LayerParams<float>*> params_;  // blocks and head, then adapters
  std::vector<LayerGrads<float>> grads_;
  std::vector<LayerGrads<float>> velocity_;  // blocks and head
  std::map<const LayerParams<float>*, LayerGrads<float>> adapter_velocity_;
  std::size_t fixed_ = 0;
  std::array<float, 2 * kBlocks> tau_grad_{};
  std::array<float, 2 * kBlocks> tau_velocity_{};
};

// Loss of head outputs against a split slice. Cross-entropy for class tasks,
// MSE otherwise; fills `grad` when non-null.
double task_loss(const TaskSpec& spec, const MatrixF& outputs, const std::vector<int>& labels,
                 const MatrixF& targets, MatrixF* grad);

// Serialization of the full graph (weights, masks, PLIF state, counters).
void encode_graph(ByteWriter& w, const ColumnGraph& graph);
ColumnGraph decode_graph(ByteReader& r);

}  // namespace tdmcl
