#include "tdmcl/topology.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tdmcl/snn/loss.hpp"

namespace tdmcl {

std::array<int, kBlocks> ladder_widths(double width_factor) {
  if (!(width_factor > 0.0)) throw ConfigError("net.width_factor must be > 0");
  std::array<int, kBlocks> w{};
  for (int b = 0; b < kBlocks; ++b)
    w[b] = static_cast<int>(std::ceil(width_factor * kBaseWidths[b] - 1e-9));
  return w;
}

MatrixF BlockModule::forward(const MatrixF& in, Index batch, int steps, bool static_input,
                             SpikeMode mode, bool keep) {
  const Index images = static_input ? batch : batch * steps;
  MatrixF a1 = conv1.forward(in, images, keep);
  MatrixF sc = shortcut.forward(in, images, keep);
  if (static_input) {
    a1 = a1.replicate(1, steps).eval();
    sc = sc.replicate(1, steps).eval();
  }
  const MatrixF s1 = plif1.forward(a1, steps, mode, keep);
  MatrixF a2 = conv2.forward(s1, batch * steps, keep);
  a2 += sc;
  return plif2.forward(a2, steps, mode, keep);
}

std::string LongRangeEdge::name() const {
  return "B" + std::to_string(source_block) + "^" + std::to_string(source_task) + "->B" +
         std::to_string(dest_block) + "^" + std::to_string(dest_task);
}

MatrixF LongRangeEdge::forward(const MatrixF& source, Index images, bool keep) {
  const MatrixF proj = adapter.forward(source, images, keep);
  return resize_nearest(proj, source_shape, dest_shape, images);
}

TaskColumn& ColumnGraph::column(int task) {
  if (task < 1 || task > tasks()) throw WiringError("no column for task " + std::to_string(task));
  return columns[task - 1];
}

const TaskColumn& ColumnGraph::column(int task) const {
  if (task < 1 || task > tasks()) throw WiringError("no column for task " + std::to_string(task));
  return columns[task - 1];
}

std::vector<LongRangeEdge*> ColumnGraph::incoming(int task) {
  std::vector<LongRangeEdge*> out;
  for (auto& e : edges)
    if (e.dest_task == task) out.push_back(&e);
  return out;
}

std::vector<int> ColumnGraph::ancestors(int task) const {
  std::set<int> seen{task};
  std::vector<int> stack{task};
  while (!stack.empty()) {
    const int t = stack.back();
    stack.pop_back();
    for (const auto& e : edges)
      if (e.dest_task == t && seen.insert(e.source_task).second) stack.push_back(e.source_task);
  }
  return {seen.begin(), seen.end()};
}

namespace {

Conv2d<float> make_conv(const std::string& name, ConvGeometry g, double gain, bool weight_norm,
                        Rng& rng) {
  return Conv2d<float>(name, g, init_layer<float>(g.out_channels, g.fan_in(), gain, weight_norm, rng));
}

}  // namespace

void grow_task_column(ColumnGraph& graph, const TaskSpec& spec, Rng& rng) {
  for (const auto& c : graph.columns) {
    if (c.task_id() == spec.task_id)
      throw GrowthError("task column " + std::to_string(spec.task_id) + " already exists");
  }
  if (spec.task_id != graph.tasks() + 1) {
    throw GrowthError("cannot grow task " + std::to_string(spec.task_id) + " after " +
                      std::to_string(graph.tasks()) + " columns");
  }
  const NetConfig& cfg = graph.config;
  const auto widths = ladder_widths(cfg.width_factor);
  TaskColumn col;
  col.spec = spec;
  Shape in{spec.channels, spec.height, spec.width};
  for (int b = 0; b < kBlocks; ++b) {
    BlockModule& m = col.blocks[b];
    m.task_id = spec.task_id;
    m.index = b + 1;
    m.input = in;
    const std::string base = m.name();
    const ConvGeometry g1{in, widths[b], 3, 2, 1};
    m.output = g1.output();
    const ConvGeometry g2{m.output, widths[b], 3, 1, 1};
    const ConvGeometry gs{in, widths[b], 1, 2, 0};
    m.conv1 = make_conv(base + ".conv1", g1, cfg.init_gain, cfg.weight_norm, rng);
    m.conv2 = make_conv(base + ".conv2", g2, cfg.init_gain, cfg.weight_norm, rng);
    m.shortcut = make_conv(base + ".shortcut", gs, cfg.init_gain, cfg.weight_norm, rng);
    m.plif1 = PlifLayer<float>(base + ".plif1", cfg.plif);
    m.plif2 = PlifLayer<float>(base + ".plif2", cfg.plif);
    in = m.output;
  }
  const int features = widths.back() * in.pixels() + spec.state_dim;
  col.head = init_layer<float>(spec.head_outputs(), features, 1.0, false, rng);
  graph.columns.push_back(std::move(col));
}

LongRangeEdge make_edge(const ColumnGraph& graph, int dest_task, int dest_block, int source_task,
                        int source_block, Rng& rng) {
  if (source_task >= dest_task) {
    throw WiringError("long-range edge from task " + std::to_string(source_task) + " into task " +
                      std::to_string(dest_task) + " must point forward in task order");
  }
  if (dest_block < 2 || dest_block > kBlocks || source_block < 1 || source_block > kBlocks)
    throw WiringError("long-range edge block index out of range");
  const BlockModule& src = graph.column(source_task).blocks[source_block - 1];
  const BlockModule& dst = graph.column(dest_task).blocks[dest_block - 1];
  LongRangeEdge e;
  e.source_task = source_task;
  e.source_block = source_block;
  e.dest_task = dest_task;
  e.dest_block = dest_block;
  e.source_shape = src.output;
  e.dest_shape = dst.input;
  const ConvGeometry g{src.output, dst.input.channels, 1, 1, 0};
  e.adapter = Conv2d<float>(e.name(), g,
                            init_layer<float>(g.out_channels, g.fan_in(), graph.config.adapter_gain,
                                              false, rng));
  e.source_shape.channels = dst.input.channels;  // after projection
  return e;
}

void wire_edges(ColumnGraph& graph, int task, const std::vector<WiringChoice>& choices, Rng& rng,
                const std::vector<LongRangeEdge>* pool) {
  for (const WiringChoice& c : choices) {
    if (c.source_task >= task) {
      throw WiringError("choice references task " + std::to_string(c.source_task) +
                        ", which is not earlier than task " + std::to_string(task));
    }
    if (!c.connects()) continue;
    const LongRangeEdge* reuse = nullptr;
    if (pool) {
      for (const auto& e : *pool)
        if (e.dest_task == task && e.dest_block == c.dest_block && e.source_task == c.source_task &&
            e.source_block == c.source_block())
          reuse = &e;
    }
    graph.edges.push_back(reuse ? *reuse
                                : make_edge(graph, task, c.dest_block, c.source_task,
                                            c.source_block(), rng));
  }
  check_acyclic(graph);
}

MatrixF merge_inputs(const MatrixF& native, const std::vector<MatrixF>& long_range) {
  MatrixF out = native;
  for (const MatrixF& m : long_range) {
    if (m.rows() != native.rows() || m.cols() != native.cols()) {
      throw WiringError("long-range input " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + " does not match native input " +
                        std::to_string(native.rows()) + "x" + std::to_string(native.cols()));
    }
    out += m;
  }
  return out;
}

void check_acyclic(const ColumnGraph& graph) {
  // Kahn's algorithm over task nodes.
  const int n = graph.tasks();
  std::vector<int> indegree(n + 1, 0);
  for (const auto& e : graph.edges) {
    if (e.source_task < 1 || e.source_task > n || e.dest_task < 1 || e.dest_task > n)
      throw WiringError("edge " + e.name() + " references a missing column");
    ++indegree[e.dest_task];
  }
  std::vector<int> ready;
  for (int t = 1; t <= n; ++t)
    if (indegree[t] == 0) ready.push_back(t);
  int visited = 0;
  while (!ready.empty()) {
    const int t = ready.back();
    ready.pop_back();
    ++visited;
    for (const auto& e : graph.edges)
      if (e.source_task == t && --indegree[e.dest_task] == 0) ready.push_back(e.dest_task);
  }
  if (visited != n) throw WiringError("long-range edges form a cycle");
}

Census parameter_census(const ColumnGraph& graph) {
  Census c;
  for (const auto& col : graph.columns) {
    for (const auto& b : col.blocks) {
      BlockCensus bc;
      bc.task = b.task_id;
      bc.block = b.index;
      for (const auto* l : b.layers()) {
        bc.total_weights += l->params().total_count();
        bc.active_weights += l->params().active_count();
      }
      c.local_total += bc.total_weights;
      c.local_active += bc.active_weights;
      c.blocks.push_back(bc);
    }
  }
  for (const auto& e : graph.edges) {
    ++c.long_range_edges;
    c.long_range_params += e.adapter.params().active_count();
  }
  return c;
}

MatrixF images_to_feature_map(const MatrixF& samples, const Shape& shape) {
  const Index pixels = shape.pixels();
  MatrixF out(shape.channels, samples.cols() * pixels);
  for (Index n = 0; n < samples.cols(); ++n) {
    out.middleCols(n * pixels, pixels) =
        Eigen::Map<const MatrixF>(samples.col(n).data(), shape.channels, pixels);
  }
  return out;
}

ColumnOutput column_forward(ColumnGraph& graph, int task, const MatrixF& images,
                            const MatrixF& states, const std::vector<LongRangeEdge*>& incoming,
                            const SourceMap& sources, SpikeMode mode, bool keep) {
  TaskColumn& col = graph.column(task);
  const int steps = graph.config.steps;
  const Index batch = images.cols();
  ColumnOutput out;
  const MatrixF x0 = images_to_feature_map(images, col.blocks[0].input);
  for (int b = 0; b < kBlocks; ++b) {
    BlockModule& m = col.blocks[b];
    if (b == 0) {
      out.spikes[b] = m.forward(x0, batch, steps, true, mode, keep);
      continue;
    }
    std::vector<MatrixF> lr;
    for (LongRangeEdge* e : incoming) {
      if (e->dest_block != m.index) continue;
      auto it = sources.find({e->source_task, e->source_block});
      if (it == sources.end() || it->second == nullptr)
        throw WiringError("missing source spikes for edge " + e->name());
      lr.push_back(e->forward(*it->second, batch * steps, keep));
    }
    const MatrixF in = lr.empty() ? out.spikes[b - 1] : merge_inputs(out.spikes[b - 1], lr);
    out.spikes[b] = m.forward(in, batch, steps, false, mode, keep);
  }
  const MatrixF& last = out.spikes[kBlocks - 1];
  const Index per_step = last.cols() / steps;
  const Index pixels = per_step / batch;
  MatrixF rates = MatrixF::Zero(last.rows(), per_step);
  for (int t = 0; t < steps; ++t) rates += last.middleCols(t * per_step, per_step);
  rates /= static_cast<float>(steps);
  // Flatten (channel, pixel) per sample.
  const Index state_dim = col.spec.state_dim;
  out.features.resize(last.rows() * pixels + state_dim, batch);
  for (Index n = 0; n < batch; ++n) {
    for (Index p = 0; p < pixels; ++p)
      out.features.col(n).segment(p * last.rows(), last.rows()) = rates.col(n * pixels + p);
    if (state_dim > 0) out.features.col(n).tail(state_dim) = states.col(n);
  }
  out.outputs = col.head.weights * out.features;
  out.outputs.colwise() += col.head.bias;
  return out;
}

namespace {

MatrixF gather_columns(const MatrixF& m, Index begin, Index count) {
  return m.middleCols(begin, count);
}

}  // namespace

MatrixF predict(ColumnGraph& graph, int task, const Split& split, Index batch_size) {
  const std::vector<int> needed = graph.ancestors(task);
  const TaskColumn& target = graph.column(task);
  MatrixF result(target.spec.head_outputs(), split.size());
  for (Index begin = 0; begin < split.size(); begin += batch_size) {
    const Index count = std::min(batch_size, split.size() - begin);
    const MatrixF images = gather_columns(split.inputs, begin, count);
    const MatrixF states = gather_columns(split.states, begin, count);
    std::map<int, ColumnOutput> outs;
    for (int t : needed) {
      SourceMap sources;
      const auto incoming = graph.incoming(t);
      for (const LongRangeEdge* e : incoming)
        sources[{e->source_task, e->source_block}] =
            &outs.at(e->source_task).spikes[e->source_block - 1];
      // Earlier columns see this task's images; their own state inputs are
      // never used as sources, so zeros suffice.
      const MatrixF st = t == task ? states
                                   : MatrixF::Zero(graph.column(t).spec.state_dim, count);
      outs[t] = column_forward(graph, t, images, st, incoming, sources, SpikeMode::kHard, false);
    }
    result.middleCols(begin, count) = outs.at(task).outputs;
  }
  return result;
}

void SourceCache::build(ColumnGraph& graph, const std::vector<int>& tasks, const Split& split,
                        Index batch_size) {
  maps_.clear();
  steps_ = graph.config.steps;
  if (tasks.empty()) return;
  std::set<int> needed;
  for (int t : tasks)
    for (int a : graph.ancestors(t)) needed.insert(a);
  const Index n = split.size();
  for (int t : tasks)
    for (int b = 2; b <= kBlocks; ++b) {
      const BlockModule& m = graph.column(t).blocks[b - 1];
      Entry& e = maps_[{t, b}];
      e.pixels = m.output.pixels();
      e.data.resize(m.output.channels, n * steps_ * e.pixels);
    }
  for (Index begin = 0; begin < n; begin += batch_size) {
    const Index count = std::min(batch_size, n - begin);
    const MatrixF images = split.inputs.middleCols(begin, count);
    std::map<int, ColumnOutput> outs;
    for (int t : needed) {
      SourceMap sources;
      const auto incoming = graph.incoming(t);
      for (const LongRangeEdge* e : incoming)
        sources[{e->source_task, e->source_block}] =
            &outs.at(e->source_task).spikes[e->source_block - 1];
      const MatrixF st = MatrixF::Zero(graph.column(t).spec.state_dim, count);
      outs[t] = column_forward(graph, t, images, st, incoming, sources, SpikeMode::kHard, false);
    }
    for (auto& [key, e] : maps_) {
      const MatrixF& s = outs.at(key.first).spikes[key.second - 1];
      const Index per_step = count * e.pixels;
      for (Index i = 0; i < count; ++i)
        for (int t = 0; t < steps_; ++t)
          e.data.middleCols(((begin + i) * steps_ + t) * e.pixels, e.pixels) =
              s.middleCols(t * per_step + i * e.pixels, e.pixels).cast<std::uint8_t>();
    }
  }
}

MatrixF SourceCache::gather(int task, int block, const std::vector<Index>& samples,
                            int steps) const {
  const Entry& e = maps_.at({task, block});
  if (steps != steps_) throw WiringError("source cache was built for a different step count");
  const Index batch = static_cast<Index>(samples.size());
  MatrixF out(e.data.rows(), batch * steps * e.pixels);
  for (Index i = 0; i < batch; ++i)
    for (int t = 0; t < steps; ++t)
      out.middleCols((t * batch + i) * e.pixels, e.pixels) =
          e.data.middleCols((samples[i] * steps + t) * e.pixels, e.pixels).cast<float>();
  return out;
}

double task_loss(const TaskSpec& spec, const MatrixF& outputs, const std::vector<int>& labels,
                 const MatrixF& targets, MatrixF* grad) {
  if (spec.output_kind == OutputKind::kClassLogits)
    return static_cast<double>(cross_entropy<float>(outputs, labels, grad));
  return static_cast<double>(mean_squared_error<float>(outputs, targets, grad));
}

ColumnTrainer::ColumnTrainer(ColumnGraph& graph, int task, std::vector<LongRangeEdge*> incoming,
                             SgdConfig sgd, double grad_clip, double adapter_lr_scale)
    : graph_(graph),
      task_(task),
      sgd_(sgd),
      adapter_sgd_(sgd),
      adapter_lr_scale_(adapter_lr_scale),
      grad_clip_(grad_clip) {
  adapter_sgd_.learning_rate = sgd.learning_rate * adapter_lr_scale;
  TaskColumn& col = graph_.column(task_);
  for (auto& b : col.blocks)
    for (auto* l : b.layers()) params_.push_back(&l->params());
  params_.push_back(&col.head);
  fixed_ = params_.size();
  for (auto* p : params_) velocity_.push_back(LayerGrads<float>::zeros_like(*p));
  set_incoming(std::move(incoming));
}

void ColumnTrainer::set_incoming(std::vector<LongRangeEdge*> incoming) {
  incoming_ = std::move(incoming);
  params_.resize(fixed_);
  for (auto* e : incoming_) {
    LayerParams<float>* p = &e->adapter.params();
    params_.push_back(p);
    if (!adapter_velocity_.count(p)) adapter_velocity_.emplace(p, LayerGrads<float>::zeros_like(*p));
  }
  grads_.clear();
  for (auto* p : params_) grads_.push_back(LayerGrads<float>::zeros_like(*p));
}

void ColumnTrainer::zero_grads() {
  for (auto& g : grads_) {
    g.weights.setZero();
    g.bias.setZero();
    g.gain.setZero();
  }
  tau_grad_.fill(0.0f);
}

double ColumnTrainer::loss(const MatrixF& images, const MatrixF& states, const SourceMap& sources,
                           const std::vector<int>& labels, const MatrixF& targets) {
  const ColumnOutput out =
      column_forward(graph_, task_, images, states, incoming_, sources, SpikeMode::kHard, false);
  return task_loss(graph_.column(task_).spec, out.outputs, labels, targets, nullptr);
}

double ColumnTrainer::step(const MatrixF& images, const MatrixF& states, const SourceMap& sources,
                           const std::vector<int>& labels, const MatrixF& targets) {
  const ColumnOutput out =
      column_forward(graph_, task_, images, states, incoming_, sources, SpikeMode::kHard, true);
  MatrixF grad;
  const double loss = task_loss(graph_.column(task_).spec, out.outputs, labels, targets, &grad);
  if (!std::isfinite(loss)) {
    throw DivergenceError("numerical divergence: non-finite loss while training task " +
                          std::to_string(task_));
  }
  zero_grads();
  backward(grad, out);
  apply();
  return loss;
}

namespace {

MatrixF fold_steps(const MatrixF& g, int steps) {
  const Index per = g.cols() / steps;
  MatrixF out = g.leftCols(per);
  for (int t = 1; t < steps; ++t) out += g.middleCols(t * per, per);
  return out;
}

}  // namespace

void ColumnTrainer::backward(const MatrixF& grad_out, const ColumnOutput& out) {
  TaskColumn& col = graph_.column(task_);
  const int steps = graph_.config.steps;
  const Index batch = grad_out.cols();
  LayerGrads<float>& gh = grads_[fixed_ - 1];
  gh.weights += grad_out * out.features.transpose();
  gh.bias += grad_out.rowwise().sum();
  const MatrixF g_feat = col.head.weights.transpose() * grad_out;

  BlockModule& last = col.blocks[kBlocks - 1];
  const Index channels = last.output.channels;
  const Index pixels = last.output.pixels();
  MatrixF g_rates(channels, batch * pixels);
  for (Index n = 0; n < batch; ++n)
    for (Index p = 0; p < pixels; ++p)
      g_rates.col(n * pixels + p) = g_feat.col(n).segment(p * channels, channels);
  g_rates /= static_cast<float>(steps);
  MatrixF g = g_rates.replicate(1, steps);

  for (int b = kBlocks - 1; b >= 0; --b) {
    BlockModule& m = col.blocks[b];
    LayerGrads<float>& g1 = grads_[3 * b];
    LayerGrads<float>& g2 = grads_[3 * b + 1];
    LayerGrads<float>& gs = grads_[3 * b + 2];
    const MatrixF g_a2 = m.plif2.backward(g, tau_grad_[2 * b + 1]);
    const MatrixF g_s1 = m.conv2.backward(g_a2, g2, true);
    MatrixF g_a1 = m.plif1.backward(g_s1, tau_grad_[2 * b]);
    const bool need_input = b > 0;
    MatrixF g_sc = g_a2;
    if (b == 0) {
      g_a1 = fold_steps(g_a1, steps);
      g_sc = fold_steps(g_sc, steps);
    }
    MatrixF g_in = m.conv1.backward(g_a1, g1, need_input);
    if (!need_input) {
      m.shortcut.backward(g_sc, gs, false);
      break;
    }
    g_in += m.shortcut.backward(g_sc, gs, true);
    for (std::size_t i = 0; i < incoming_.size(); ++i) {
      LongRangeEdge* e = incoming_[i];
      if (e->dest_block != m.index) continue;
      const MatrixF g_proj = resize_nearest_backward(g_in, e->source_shape, e->dest_shape,
                                                     batch * steps);
      e->adapter.backward(g_proj, grads_[fixed_ + i], false);
    }
    g = std::move(g_in);
  }
}

void ColumnTrainer::apply() {
  if (grad_clip_ > 0.0) {
    double sq = 0.0;
    for (const auto& g : grads_) sq += static_cast<double>(squared_norm(g));
    for (float t : tau_grad_) sq += static_cast<double>(t) * t;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) {
      throw DivergenceError("numerical divergence: non-finite gradient while training task " +
                            std::to_string(task_));
    }
    if (norm > grad_clip_) {
      const float f = static_cast<float>(grad_clip_ / norm);
      for (auto& g : grads_) scale(g, f);
      for (float& t : tau_grad_) t *= f;
    }
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (i < fixed_) {
      sgd_update(*params_[i], grads_[i], velocity_[i], sgd_);
    } else {
      sgd_update(*params_[i], grads_[i], adapter_velocity_.at(params_[i]), adapter_sgd_);
    }
  }
  TaskColumn& col = graph_.column(task_);
  for (int b = 0; b < kBlocks; ++b) {
    sgd_update(col.blocks[b].plif1.tau_raw(), tau_grad_[2 * b], tau_velocity_[2 * b], sgd_);
    sgd_update(col.blocks[b].plif2.tau_raw(), tau_grad_[2 * b + 1], tau_velocity_[2 * b + 1], sgd_);
  }
}

// ---- serialization ----

namespace {

void put_shape(ByteWriter& w, const Shape& s) {
  w.u32(s.channels);
  w.u32(s.height);
  w.u32(s.width);
}

Shape get_shape(ByteReader& r) {
  Shape s;
  s.channels = static_cast<int>(r.u32());
  s.height = static_cast<int>(r.u32());
  s.width = static_cast<int>(r.u32());
  return s;
}

void put_geometry(ByteWriter& w, const ConvGeometry& g) {
  put_shape(w, g.input);
  w.u32(g.out_channels);
  w.u32(g.kernel);
  w.u32(g.stride);
  w.u32(g.pad);
}

ConvGeometry get_geometry(ByteReader& r) {
  ConvGeometry g;
  g.input = get_shape(r);
  g.out_channels = static_cast<int>(r.u32());
  g.kernel = static_cast<int>(r.u32());
  g.stride = static_cast<int>(r.u32());
  g.pad = static_cast<int>(r.u32());
  if (g.kernel < 1 || g.stride < 1 || g.out_channels < 1 || g.input.channels < 1)
    r.fail("invalid layer geometry");
  return g;
}

void put_params(ByteWriter& w, const LayerParams<float>& p) {
  w.u32(static_cast<std::uint32_t>(p.weights.rows()));
  w.u32(static_cast<std::uint32_t>(p.weights.cols()));
  w.matrix_f32(p.weights);
  w.bitmask(p.mask);
  w.matrix_f32(p.bias);
  w.u32(static_cast<std::uint32_t>(p.gain.size()));
  w.matrix_f32(p.gain);
}

LayerParams<float> get_params(ByteReader& r) {
  LayerParams<float> p;
  const Index rows = r.u32(), cols = r.u32();
  if (rows * cols > static_cast<Index>(r.remaining())) r.fail("layer shape exceeds file size");
  p.weights = r.matrix_f32(rows, cols);
  p.mask = r.bitmask(rows, cols);
  p.bias = r.matrix_f32(rows, 1);
  const Index g = r.u32();
  if (g != 0 && g != rows) r.fail("gain vector length mismatch");
  p.gain = r.matrix_f32(g, 1);
  return p;
}

void put_conv(ByteWriter& w, const Conv2d<float>& c) {
  w.str(c.name());
  put_geometry(w, c.geometry());
  put_params(w, c.params());
}

Conv2d<float> get_conv(ByteReader& r) {
  std::string name = r.str();
  const ConvGeometry g = get_geometry(r);
  LayerParams<float> p = get_params(r);
  if (p.weights.rows() != g.out_channels || p.weights.cols() != g.fan_in())
    r.fail("weights of '" + name + "' disagree with its shape header");
  return Conv2d<float>(std::move(name), g, std::move(p));
}

void put_plif(ByteWriter& w, const PlifLayer<float>& p) {
  w.str(p.name());
  w.f32(p.tau_raw());
  w.f32(p.v_th());
  w.f32(p.beta());
}

PlifLayer<float> get_plif(ByteReader& r) {
  std::string name = r.str();
  PlifConfig cfg;
  cfg.tau_init = r.f32();
  cfg.v_th = r.f32();
  cfg.beta = r.f32();
  PlifLayer<float> p(std::move(name), cfg);
  return p;
}

void put_spec(ByteWriter& w, const TaskSpec& s) {
  w.u32(s.task_id);
  w.u32(static_cast<std::uint32_t>(s.family));
  w.str(s.name);
  w.u32(s.channels);
  w.u32(s.height);
  w.u32(s.width);
  w.u32(s.state_dim);
  w.u32(static_cast<std::uint32_t>(s.output_kind));
  w.u32(s.num_classes);
  w.u32(s.action_dim);
  w.u32(s.horizon);
  w.u32(static_cast<std::uint32_t>(s.metric));
  w.u32(static_cast<std::uint32_t>(s.overlap.shared_with.size()));
  for (int k : s.overlap.shared_with) w.u32(k);
  w.f64(s.overlap.strength);
}

TaskSpec get_spec(ByteReader& r) {
  TaskSpec s;
  s.task_id = static_cast<int>(r.u32());
  const auto fam = r.u32();
  if (fam > 2) r.fail("unknown task family");
  s.family = static_cast<Family>(fam);
  s.name = r.str();
  s.channels = static_cast<int>(r.u32());
  s.height = static_cast<int>(r.u32());
  s.width = static_cast<int>(r.u32());
  s.state_dim = static_cast<int>(r.u32());
  const auto kind = r.u32();
  if (kind > 2) r.fail("unknown output kind");
  s.output_kind = static_cast<OutputKind>(kind);
  s.num_classes = static_cast<int>(r.u32());
  s.action_dim = static_cast<int>(r.u32());
  s.horizon = static_cast<int>(r.u32());
  const auto metric = r.u32();
  if (metric > 2) r.fail("unknown metric");
  s.metric = static_cast<MetricKind>(metric);
  const auto shared = r.u32();
  if (shared > 64) r.fail("implausible overlap list");
  for (std::uint32_t i = 0; i < shared; ++i) s.overlap.shared_with.push_back(static_cast<int>(r.u32()));
  s.overlap.strength = r.f64();
  return s;
}

}  // namespace

void encode_graph(ByteWriter& w, const ColumnGraph& g) {
  const NetConfig& c = g.config;
  w.f64(c.width_factor);
  w.u32(c.steps);
  w.f64(c.plif.tau_init);
  w.f64(c.plif.v_th);
  w.f64(c.plif.beta);
  w.f64(c.init_gain);
  w.f64(c.adapter_gain);
  w.u8(c.weight_norm ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(g.columns.size()));
  for (const auto& col : g.columns) {
    put_spec(w, col.spec);
    for (const auto& b : col.blocks) {
      w.u32(b.index);
      put_shape(w, b.input);
      put_shape(w, b.output);
      w.u32(b.training_runs);
      put_conv(w, b.conv1);
      put_conv(w, b.conv2);
      put_conv(w, b.shortcut);
      put_plif(w, b.plif1);
      put_plif(w, b.plif2);
    }
    put_params(w, col.head);
  }
  w.u32(static_cast<std::uint32_t>(g.edges.size()));
  for (const auto& e : g.edges) {
    w.u32(e.source_task);
    w.u32(e.source_block);
    w.u32(e.dest_task);
    w.u32(e.dest_block);
    put_shape(w, e.source_shape);
    put_shape(w, e.dest_shape);
    put_conv(w, e.adapter);
  }
}

ColumnGraph decode_graph(ByteReader& r) {
  ColumnGraph g;
  NetConfig& c = g.config;
  c.width_factor = r.f64();
  c.steps = static_cast<int>(r.u32());
  c.plif.tau_init = r.f64();
  c.plif.v_th = r.f64();
  c.plif.beta = r.f64();
  c.init_gain = r.f64();
  c.adapter_gain = r.f64();
  c.weight_norm = r.u8() != 0;
  if (c.steps < 1) r.fail("invalid step count");
  const auto n = r.u32();
  if (n > 1024) r.fail("implausible column count");
  for (std::uint32_t i = 0; i < n; ++i) {
    TaskColumn col;
    col.spec = get_spec(r);
    if (col.spec.task_id != static_cast<int>(i) + 1) r.fail("columns out of task order");
    for (int b = 0; b < kBlocks; ++b) {
      BlockModule& m = col.blocks[b];
      m.task_id = col.spec.task_id;
      m.index = static_cast<int>(r.u32());
      if (m.index != b + 1) r.fail("blocks out of order");
      m.input = get_shape(r);
      m.output = get_shape(r);
      m.training_runs = static_cast<int>(r.u32());
      m.conv1 = get_conv(r);
      m.conv2 = get_conv(r);
      m.shortcut = get_conv(r);
      m.plif1 = get_plif(r);
      m.plif2 = get_plif(r);
    }
    col.head = get_params(r);
    g.columns.push_back(std::move(col));
  }
  const auto ne = r.u32();
  if (ne > 1u << 20) r.fail("implausible edge count");
  for (std::uint32_t i = 0; i < ne; ++i) {
    LongRangeEdge e;
    e.source_task = static_cast<int>(r.u32());
    e.source_block = static_cast<int>(r.u32());
    e.dest_task = static_cast<int>(r.u32());
    e.dest_block = static_cast<int>(r.u32());
    e.source_shape = get_shape(r);
    e.dest_shape = get_shape(r);
    e.adapter = get_conv(r);
    g.edges.push_back(std::move(e));
  }
  try {
    check_acyclic(g);
  } catch (const WiringError& e) {
    r.fail(e.what());
  }
  return g;
}

}  // namespace tdmcl
