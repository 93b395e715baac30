#include "tdmcl/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "tdmcl/binary_io.hpp"
#include "tdmcl/training.hpp"

namespace tdmcl {

namespace fs = std::filesystem;

bool uses_long_range(RunMode mode) {
  return mode == RunMode::kFull || mode == RunMode::kNoInhibition;
}

bool uses_pruning(RunMode mode) {
  return mode == RunMode::kFull || mode == RunMode::kDirectPruning;
}

std::vector<PhaseStep> phase_schedule(const RunConfig& cfg) {
  std::vector<PhaseStep> s;
  for (int t = 1; t <= cfg.run.tasks; ++t) {
    s.push_back({Phase::kGrow, t});
    if (t >= 2 && uses_long_range(cfg.run.mode)) s.push_back({Phase::kEvolve, t});
    s.push_back({Phase::kTrain, t});
    if (t >= 2 && uses_pruning(cfg.run.mode) && (t - 1) % cfg.plasticity.cadence == 0)
      s.push_back({Phase::kPrune, t});
  }
  return s;
}

int train_phase_epochs(const RunConfig& cfg, int task) {
  // Isolated modes get the epochs a full-mode column spends in evolution.
  if (task >= 2 && !uses_long_range(cfg.run.mode))
    return cfg.train.epochs + cfg.evolution.episodes * cfg.evolution.burst_epochs;
  return cfg.train.epochs;
}

namespace {

std::string dataset_path(const std::string& dir, int task) {
  return (fs::path(dir) / ("task_" + std::to_string(task) + ".tdmd")).string();
}

}  // namespace

void write_suite(const std::vector<Dataset>& suite, const SuiteConfig& cfg, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
  for (const Dataset& d : suite) write_dataset(dataset_path(dir, d.spec.task_id), d);
  write_file_atomic((fs::path(dir) / "manifest.csv").string(), suite_manifest_csv(suite, cfg));
}

std::vector<Dataset> load_or_generate_suite(SuiteConfig& cfg, int tasks, const std::string& out_dir) {
  const std::string dir = (fs::path(out_dir) / "suite").string();
  std::vector<Dataset> suite;
  if (!out_dir.empty() && fs::exists(dataset_path(dir, 1))) {
    for (int t = 1; t <= tasks; ++t) suite.push_back(read_dataset(dataset_path(dir, t)));
    cfg.seed = suite.front().generator_seed;
    cfg.train_size = static_cast<int>(suite.front().train.size());
    cfg.val_size = static_cast<int>(suite.front().val.size());
    cfg.test_size = static_cast<int>(suite.front().test.size());
    if (suite.size() >= 2) cfg.overlap = suite[1].spec.overlap.strength;
    return suite;
  }
  const std::vector<TaskSpec> specs = default_specs(cfg.overlap);
  for (int t = 1; t <= tasks; ++t) suite.push_back(generate_task(specs.at(t - 1), cfg));
  return suite;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string choice_digest(const ChoiceMatrix& m) {
  ByteWriter w;
  w.u32(m.task);
  w.u32(m.episodes);
  for (int r = 0; r < m.rows(); ++r)
    for (int o = 0; o < kOptions; ++o) w.f64(m.p(r, o));
  for (const RowHistory& h : m.history)
    for (const OptionHistory& o : h.options) w.u32(o.count);
  return hex64(fnv1a64(w.data()));
}

// One run in progress: state, data, metric memo and ledger sink.
class Session {
 public:
  Session(RunState state, std::vector<Dataset> suite, RunOptions opts)
      : state_(std::move(state)), suite_(std::move(suite)), opts_(std::move(opts)) {
    versions_.assign(static_cast<std::size_t>(state_.config.run.tasks) + 1, 0);
    schedule_ = phase_schedule(state_.config);
    probes_.resize(suite_.size());
  }

  RunState& state() { return state_; }
  const std::vector<Dataset>& suite() const { return suite_; }

  RunOutcome run() {
    RunOutcome outcome;
    const fs::path dir(opts_.out_dir);
    while (state_.next_phase < schedule_.size()) {
      if (opts_.stop_after >= 0 && outcome.phases_executed >= static_cast<std::size_t>(opts_.stop_after))
        break;
      const std::size_t index = state_.next_phase;
      const PhaseStep step = schedule_[index];
      const auto t0 = std::chrono::steady_clock::now();
      PhaseRecord rec;
      try {
        rec = execute(index, step);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " during phase " + std::to_string(index) + " (" +
                              to_string(step.phase) + " task " + std::to_string(step.task) +
                              "); last good checkpoint: " + checkpoint_path());
      }
      append_ledger(rec);
      ++state_.next_phase;
      write_checkpoint(checkpoint_path(), state_);
      ++outcome.phases_executed;
      if (opts_.progress) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream line;
        line << "[" << std::setw(2) << index + 1 << "/" << schedule_.size() << "] "
             << std::left << std::setw(6) << to_string(step.phase) << std::right << " task "
             << step.task << "  avg ";
        if (rec.average) line << std::fixed << std::setprecision(2) << *rec.average;
        else line << "-";
        line << "  active " << rec.local_active << "  edges " << rec.long_range_edges
             << "  lr-sparsity " << std::fixed << std::setprecision(3) << rec.long_range_sparsity
             << "  " << std::setprecision(1) << secs << "s\n";
        *opts_.progress << line.str() << std::flush;
      }
    }
    outcome.complete = state_.next_phase >= schedule_.size();
    if (outcome.complete) {
      const std::vector<KernelStat> kernels = kernel_table(state_, suite_);
      write_reports(opts_.out_dir, read_ledger(ledger_path()), &kernels);
    }
    outcome.state = state_;
    return outcome;
  }

  void start_ledger(bool fresh) {
    const std::string path = ledger_path();
    if (fresh) {
      std::ofstream out(path, std::ios::trunc);
      if (!out) throw IoError("cannot write ledger '" + path + "'");
      return;
    }
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec || size < state_.ledger_bytes)
      throw IoError("ledger '" + path + "' is shorter than the checkpoint's ledger offset");
    fs::resize_file(path, state_.ledger_bytes, ec);
    if (ec) throw IoError("cannot truncate ledger '" + path + "': " + ec.message());
  }

  std::string ledger_path() const { return (fs::path(opts_.out_dir) / "ledger.jsonl").string(); }
  std::string checkpoint_path() const {
    return (fs::path(opts_.out_dir) / "checkpoint.tdmcl").string();
  }

 private:
  const RunConfig& cfg() const { return state_.config; }

  const Split& probe(int task) {
    auto& p = probes_.at(task - 1);
    if (!p)
      p = probe_subset(suite_.at(task - 1).train, cfg().plasticity.probe_size, cfg().run.seed, task);
    return *p;
  }

  PhaseRecord execute(std::size_t index, const PhaseStep& step) {
    Rng rng = state_.master.fork(index);
    PhaseRecord rec;
    rec.index = static_cast<int>(index);
    rec.phase = step.phase;
    rec.task = step.task;
    int learned = step.task - 1;
    switch (step.phase) {
      case Phase::kGrow:
        grow_task_column(state_.graph, suite_.at(step.task - 1).spec, rng);
        break;
      case Phase::kEvolve:
        evolve(step.task, rng, rec);
        break;
      case Phase::kTrain:
        train(step.task, rng, rec);
        learned = step.task;
        break;
      case Phase::kPrune:
        prune(step.task, rec);
        learned = step.task;
        break;
    }
    fill_metrics(rec, learned);
    return rec;
  }

  void evolve(int task, Rng& rng, PhaseRecord& rec) {
    ColumnGraph& g = state_.graph;
    const Dataset& d = suite_.at(task - 1);
    std::vector<int> earlier(static_cast<std::size_t>(task - 1));
    std::iota(earlier.begin(), earlier.end(), 1);
    SourceCache train_cache, val_cache;
    train_cache.build(g, earlier, d.train);
    val_cache.build(g, earlier, d.val);

    // One adapter per possible (dest block, earlier task, source block).
    std::vector<LongRangeEdge> pool;
    for (int dest = 2; dest <= kBlocks; ++dest)
      for (int k = 1; k < task; ++k)
        for (int src = 2; src <= kBlocks; ++src) pool.push_back(make_edge(g, task, dest, k, src, rng));
    auto adapter = [&](const WiringChoice& c) -> LongRangeEdge* {
      for (auto& e : pool)
        if (e.dest_block == c.dest_block && e.source_task == c.source_task &&
            e.source_block == c.source_block())
          return &e;
      return nullptr;
    };

    const TrainConfig& tc = cfg().train;
    ColumnTrainer trainer(g, task, {}, SgdConfig{tc.learning_rate, tc.momentum}, tc.grad_clip,
                          tc.adapter_lr_scale);
    ChoiceMatrix m = init_choice_matrix(task);
    for (int episode = 0; episode < cfg().evolution.episodes; ++episode) {
      const std::vector<WiringChoice> sampled = sample_wiring(m, rng);
      std::vector<LongRangeEdge*> incoming;
      for (const auto& c : sampled)
        if (c.connects()) incoming.push_back(adapter(c));
      train_epochs(trainer, incoming, task, g.config.steps, d.train, train_cache, tc,
                   cfg().evolution.burst_epochs, true, rng);
      const double loss = mean_loss(g, task, incoming, d.val, val_cache);
      if (!std::isfinite(loss))
        throw DivergenceError("numerical divergence: non-finite episode loss for task " +
                              std::to_string(task));
      record_episode(m, sampled, loss);
      update_choice_matrix(m, cfg().evolution.gamma, cfg().evolution.h_l_scope);
      rec.episode_losses.push_back(loss);
    }
    rec.wiring = finalize_wiring(m);
    wire_edges(g, task, rec.wiring, rng, &pool);
    for (int row = 0; row < m.rows(); ++row)
      for (int o = 0; o < kOptions; ++o)
        rec.choices.push_back(ChoiceRow{task, m.dest_block_of_row(row), m.source_task_of_row(row), o,
                                        m.p(row, o), m.history[row].options[o].count,
                                        performance_score(m, row, o, cfg().evolution.h_l_scope)});
    state_.choices[task] = std::move(m);
    ++versions_[task];
  }

  void train(int task, Rng& rng, PhaseRecord& rec) {
    ColumnGraph& g = state_.graph;
    const Dataset& d = suite_.at(task - 1);
    const std::vector<LongRangeEdge*> incoming = g.incoming(task);
    SourceCache cache;
    cache.build(g, source_tasks(incoming), d.train);
    rec.epochs = train_phase_epochs(cfg(), task);
    rec.train_loss = train_epochs(g, task, incoming, d.train, cache, cfg().train, rec.epochs, false, rng);
    for (auto& b : g.column(task).blocks) ++b.training_runs;
    ++versions_[task];
  }

  void prune(int task, PhaseRecord& rec) {
    ColumnGraph& g = state_.graph;
    const int round = ++state_.prune_rounds;
    const PlasticityConfig& pc = cfg().plasticity;
    for (int k = 1; k < task; ++k) {
      const ColumnHebbian h = column_hebbian(g, k, probe(k), pc.alpha, pc.hebbian_scope);
      std::array<double, kBlocks> e{};
      if (cfg().run.mode == RunMode::kFull) {
        std::vector<const ChoiceMatrix*> later;
        for (int t = k + 1; t <= task; ++t)
          if (auto it = state_.choices.find(t); it != state_.choices.end()) later.push_back(&it->second);
        for (int b = 1; b <= kBlocks; ++b) e[b - 1] = generality(later, k, b);
      }
      const auto rows = prune_column(g, k, h, e, pc.maturity, pc.quantile, round);
      rec.pruning.insert(rec.pruning.end(), rows.begin(), rows.end());
      ++versions_[k];
    }
  }

  void fill_metrics(PhaseRecord& rec, int learned) {
    std::vector<int> pending;
    for (int t = 1; t <= learned; ++t)
      if (!memo_fresh(t)) pending.push_back(t);
    const std::vector<double> values =
        evaluate_tasks(state_.graph, pending, suite_, cfg().suite.command_tolerance, opts_.threads);
    for (std::size_t i = 0; i < pending.size(); ++i)
      memo_[pending[i]] = {dependency_versions(pending[i]), values[i]};
    double sum = 0.0;
    for (int t = 1; t <= learned; ++t) {
      const double v = memo_.at(t).second;
      rec.metrics.emplace_back(t, v);
      sum += v;
    }
    if (learned > 0) rec.average = sum / learned;
    const Census c = parameter_census(state_.graph);
    rec.local_total = c.local_total;
    rec.local_active = c.local_active;
    rec.long_range_edges = c.long_range_edges;
    rec.long_range_params = c.long_range_params;
    rec.blocks = c.blocks;
    rec.long_range_sparsity = finalized_sparsity(state_.choices);
    for (const auto& [t, m] : state_.choices) rec.choice_digests.emplace_back(t, choice_digest(m));
  }

  std::vector<std::uint64_t> dependency_versions(int task) const {
    std::vector<std::uint64_t> v;
    for (int a : state_.graph.ancestors(task)) v.push_back(versions_.at(a));
    return v;
  }

  bool memo_fresh(int task) const {
    auto it = memo_.find(task);
    return it != memo_.end() && it->second.first == dependency_versions(task);
  }

  void append_ledger(const PhaseRecord& rec) {
    const std::string line = record_to_json(rec) + "\n";
    std::ofstream out(ledger_path(), std::ios::app | std::ios::binary);
    out << line;
    out.flush();
    if (!out) throw IoError("cannot append to ledger '" + ledger_path() + "'");
    state_.ledger_bytes += line.size();
    ++state_.ledger_records;
  }

  RunState state_;
  std::vector<Dataset> suite_;
  RunOptions opts_;
  std::vector<PhaseStep> schedule_;
  std::vector<std::uint64_t> versions_;
  std::map<int, std::pair<std::vector<std::uint64_t>, double>> memo_;
  std::vector<std::optional<Split>> probes_;
};

void prepare_out_dir(const std::string& dir) {
  if (dir.empty()) throw IoError("no output directory given");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

}  // namespace

RunOutcome run_continual(const RunConfig& config, const RunOptions& opts) {
  prepare_out_dir(opts.out_dir);
  RunState state;
  state.config = config;
  validate(state.config);
  std::vector<Dataset> suite = load_or_generate_suite(state.config.suite, config.run.tasks, opts.out_dir);
  write_file_atomic((fs::path(opts.out_dir) / "effective.cfg").string(), echo_config(state.config));
  write_file_atomic((fs::path(opts.out_dir) / "manifest.csv").string(),
                    suite_manifest_csv(suite, state.config.suite));
  state.graph.config = state.config.net;
  state.master = Rng(state.config.run.seed);
  Session session(std::move(state), std::move(suite), opts);
  session.start_ledger(true);
  return session.run();
}

RunOutcome resume_run(const RunOptions& opts) {
  const std::string path = (fs::path(opts.out_dir) / "checkpoint.tdmcl").string();
  RunState state = read_checkpoint(path);
  SuiteConfig sc = state.config.suite;
  std::vector<Dataset> suite = load_or_generate_suite(sc, state.config.run.tasks, opts.out_dir);
  Session session(std::move(state), std::move(suite), opts);
  session.start_ledger(false);
  return session.run();
}

double evaluate_task(RunState& state, const std::vector<Dataset>& suite, int task) {
  const Dataset& d = suite.at(task - 1);
  const MatrixF pred = predict(state.graph, task, d.test);
  return metric_points(d.spec, pred, d.test, state.config.suite.command_tolerance);
}

FineTuneResult fine_tune(RunState& state, const std::vector<Dataset>& suite, int task, int epochs,
                         int threads) {
  (void)threads;
  if (task < 1 || task > state.graph.tasks())
    throw ConfigError("fine-tune: task " + std::to_string(task) + " has no column");
  FineTuneResult r;
  r.before = evaluate_task(state, suite, task);
  if (epochs <= 0) {
    r.after = r.before;
    return r;
  }
  ColumnGraph& g = state.graph;
  const Dataset& d = suite.at(task - 1);
  const std::vector<LongRangeEdge*> incoming = g.incoming(task);
  SourceCache cache;
  cache.build(g, source_tasks(incoming), d.train);
  Rng rng = Rng::derive(state.config.run.seed, 0x66696e65ULL ^ static_cast<std::uint64_t>(task));
  train_epochs(g, task, incoming, d.train, cache, state.config.train, epochs, false, rng);
  for (auto& b : g.column(task).blocks) ++b.training_runs;
  r.after = evaluate_task(state, suite, task);
  return r;
}

std::vector<KernelStat> kernel_table(RunState& state, const std::vector<Dataset>& suite) {
  std::vector<KernelStat> out;
  const PlasticityConfig& pc = state.config.plasticity;
  for (int k = 1; k < state.graph.tasks(); ++k) {
    const Split probe = probe_subset(suite.at(k - 1).train, pc.probe_size, state.config.run.seed, k);
    const ColumnHebbian h = column_hebbian(state.graph, k, probe, pc.alpha, pc.hebbian_scope);
    const auto rows = column_kernel_stats(state.graph, k, h);
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

}  // namespace tdmcl
