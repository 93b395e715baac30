#include "tdmcl/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <set>
#include <thread>

namespace tdmcl {

double scheduled_lr(const TrainConfig& cfg, int epoch, int epochs, bool constant) {
  if (constant || cfg.schedule == LrSchedule::kConstant || epochs <= 0) return cfg.learning_rate;
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(M_PI * epoch / epochs));
}

std::vector<int> source_tasks(const std::vector<LongRangeEdge*>& incoming) {
  std::set<int> s;
  for (const LongRangeEdge* e : incoming) s.insert(e->source_task);
  return {s.begin(), s.end()};
}

std::map<std::pair<int, int>, MatrixF> gather_sources(const std::vector<LongRangeEdge*>& incoming,
                                                      const SourceCache& cache,
                                                      const std::vector<Index>& samples,
                                                      int steps) {
  std::map<std::pair<int, int>, MatrixF> out;
  for (const LongRangeEdge* e : incoming) {
    const auto key = std::make_pair(e->source_task, e->source_block);
    if (!out.count(key)) out.emplace(key, cache.gather(key.first, key.second, samples, steps));
  }
  return out;
}

namespace {

struct Batch {
  MatrixF images;
  MatrixF states;
  MatrixF targets;
  std::vector<int> labels;
};

Batch make_batch(const Split& split, const std::vector<Index>& samples) {
  Batch b;
  const Index n = static_cast<Index>(samples.size());
  b.images.resize(split.inputs.rows(), n);
  b.states.resize(split.states.rows(), n);
  b.targets.resize(split.targets.rows(), n);
  for (Index i = 0; i < n; ++i) {
    const Index s = samples[i];
    b.images.col(i) = split.inputs.col(s);
    if (b.states.rows()) b.states.col(i) = split.states.col(s);
    if (b.targets.rows()) b.targets.col(i) = split.targets.col(s);
    if (!split.labels.empty()) b.labels.push_back(split.labels[s]);
  }
  return b;
}

SourceMap as_source_map(const std::map<std::pair<int, int>, MatrixF>& gathered) {
  SourceMap m;
  for (const auto& [k, v] : gathered) m[k] = &v;
  return m;
}

}  // namespace

double train_epochs(ColumnTrainer& trainer, const std::vector<LongRangeEdge*>& incoming, int task,
                    int steps, const Split& split, const SourceCache& cache,
                    const TrainConfig& cfg, int epochs, bool constant_lr, Rng& rng) {
  (void)task;
  trainer.set_incoming(incoming);
  std::vector<Index> order(static_cast<std::size_t>(split.size()));
  std::iota(order.begin(), order.end(), Index{0});
  double last = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    trainer.set_learning_rate(scheduled_lr(cfg, epoch, epochs, constant_lr));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double sum = 0.0;
    Index seen = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<Index> samples(order.begin() + begin, order.begin() + end);
      const Batch b = make_batch(split, samples);
      const auto gathered = gather_sources(incoming, cache, samples, steps);
      const double loss = trainer.step(b.images, b.states, as_source_map(gathered), b.labels, b.targets);
      sum += loss * static_cast<double>(samples.size());
      seen += static_cast<Index>(samples.size());
    }
    last = seen ? sum / static_cast<double>(seen) : 0.0;
  }
  return last;
}

double train_epochs(ColumnGraph& graph, int task, const std::vector<LongRangeEdge*>& incoming,
                    const Split& split, const SourceCache& cache, const TrainConfig& cfg,
                    int epochs, bool constant_lr, Rng& rng) {
  ColumnTrainer trainer(graph, task, incoming, SgdConfig{cfg.learning_rate, cfg.momentum},
                        cfg.grad_clip, cfg.adapter_lr_scale);
  return train_epochs(trainer, incoming, task, graph.config.steps, split, cache, cfg, epochs,
                      constant_lr, rng);
}

double mean_loss(ColumnGraph& graph, int task, const std::vector<LongRangeEdge*>& incoming,
                 const Split& split, const SourceCache& cache, Index batch_size) {
  const TaskSpec& spec = graph.column(task).spec;
  double sum = 0.0;
  for (Index begin = 0; begin < split.size(); begin += batch_size) {
    const Index count = std::min(batch_size, split.size() - begin);
    std::vector<Index> samples(static_cast<std::size_t>(count));
    std::iota(samples.begin(), samples.end(), begin);
    const Batch b = make_batch(split, samples);
    const auto gathered = gather_sources(incoming, cache, samples, graph.config.steps);
    const ColumnOutput out = column_forward(graph, task, b.images, b.states, incoming,
                                            as_source_map(gathered), SpikeMode::kHard, false);
    sum += task_loss(spec, out.outputs, b.labels, b.targets, nullptr) * static_cast<double>(count);
  }
  return split.size() ? sum / static_cast<double>(split.size()) : 0.0;
}

int worker_threads() {
  if (const char* env = std::getenv("TDMCL_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> evaluate_tasks(const ColumnGraph& graph, const std::vector<int>& tasks,
                                   const std::vector<Dataset>& suite, double command_tolerance,
                                   int threads) {
  std::vector<double> out(tasks.size(), 0.0);
  std::vector<std::exception_ptr> errors(tasks.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    ColumnGraph local = graph;
    for (std::size_t i = first; i < tasks.size(); i += stride) {
      try {
        const Dataset& d = suite.at(tasks[i] - 1);
        const MatrixF pred = predict(local, tasks[i], d.test);
        out[i] = metric_points(d.spec, pred, d.test, command_tolerance);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(tasks.size(), static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace tdmcl
