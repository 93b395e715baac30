// Acceptance suite: exact oracles plus seeded end-to-end runs.
//
// Environment:
//   TDMCL_ACCEPT_DIR    run directory (default ./acceptance_runs); completed
//                       runs found there are reused
//   TDMCL_ACCEPT_QUICK  1 shrinks every budget for a fast smoke pass
//   TDMCL_ACCEPT_ONLY   comma list of criteria to evaluate (default all)
//   TDMCL_THREADS       evaluation threads

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tdmcl/binary_io.hpp"
#include "tdmcl/evolution.hpp"
#include "tdmcl/plasticity.hpp"
#include "tdmcl/runner.hpp"
#include "tdmcl/snn/mlp.hpp"
#include "tdmcl/snn/plif.hpp"
#include "tdmcl/training.hpp"

namespace fs = std::filesystem;
using namespace tdmcl;

namespace {

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 2) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

bool env_flag(const char* name) {
  const char* v = std::getenv(name);
  return v != nullptr && std::string(v) == "1";
}

// ---------------------------------------------------------------- oracles

Verdict criterion_oracles() {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };

  {  // neuron step hand cases
    PlifState<double> zero(1, 2.0, 1.0);
    auto r = plif_step(zero, VectorD::Zero(1));
    expect(r.potential(0) == 0.0 && r.spikes(0) == 0.0, "plif zero dynamics");
    PlifState<double> fire(1, 0.0, 1.0);
    fire.membrane(0) = 1.0;
    r = plif_step(fire, VectorD::Constant(1, 0.6));
    expect(std::abs(r.potential(0) - 1.1) < 1e-15 && r.spikes(0) == 1.0 &&
               fire.membrane(0) == 0.0,
           "plif fire and reset");
    PlifState<double> sub(1, 0.0, 1.0);
    sub.membrane(0) = 0.4;
    r = plif_step(sub, VectorD::Constant(1, 0.2));
    expect(std::abs(r.potential(0) - 0.4) < 1e-15 && r.spikes(0) == 0.0, "plif subthreshold");
  }

  {  // controller update against a literal pairwise loop
    Rng rng(123);
    for (int trial = 0; trial < 1000; ++trial) {
      Eigen::VectorXd h_n(kOptions), h_l(kOptions), p(kOptions);
      for (int i = 0; i < kOptions; ++i) {
        h_n(i) = static_cast<double>(rng.below(5));
        h_l(i) = static_cast<double>(rng.below(5)) / 4.0;
        p(i) = rng.uniform(0.01, 1.0);
      }
      p /= p.sum();
      Eigen::VectorXd logit(kOptions);
      const PairwiseCounts c = pairwise_counts(h_n, h_l);
      for (int i = 0; i < kOptions; ++i) {
        int plus = 0, minus = 0;
        for (int j = 0; j < kOptions; ++j) {
          const double dn = h_n(i) - h_n(j), dl = h_l(i) - h_l(j);
          plus += dn < 0 && dl > 0;
          minus += dn > 0 && dl < 0;
        }
        if (c.plus(i) != plus || c.minus(i) != minus) {
          failed.push_back("pairwise counts, trial " + std::to_string(trial));
          trial = 1000;
          break;
        }
        logit(i) = p(i) + 0.5 * (plus - minus);
      }
      const Eigen::VectorXd out = update_probabilities(p, h_n, h_l, 0.5);
      const Eigen::VectorXd e = logit.array().exp();
      expect(std::abs(out.sum() - 1.0) <= 1e-9, "simplex");
      expect((out - e / e.sum()).cwiseAbs().maxCoeff() < 1e-12, "softmax update");
    }
  }

  {  // trace closed form
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const int steps = 1 + static_cast<int>(rng.below(8));
      const double alpha = rng.uniform(0.0, 0.99);
      MatrixD spikes(3, steps);
      for (Index i = 0; i < spikes.size(); ++i) spikes(i) = static_cast<double>(rng.below(2));
      TraceState<double> s(3, alpha);
      VectorD closed = VectorD::Zero(3);
      for (int t = 0; t < steps; ++t) {
        update_trace(s, VectorD(spikes.col(t)));
        closed += std::pow(alpha, steps - 1 - t) * spikes.col(t);
      }
      expect((s.trace - closed).cwiseAbs().maxCoeff() < 1e-12, "trace closed form");
    }
  }

  {  // Hebbian outer product
    VectorD post(2), pre(2);
    post << 2, 1;
    pre << 1, 3;
    MatrixD expected(2, 2);
    expected << 0.2, 1.0, 0.0, 0.4;
    expect((hebbian_matrix(post, pre) - expected).cwiseAbs().maxCoeff() < 1e-15, "hebbian");
  }

  {  // threshold coefficient at H + E = 1, n >= N
    const double v = threshold_coeffs(MatrixD::Constant(1, 1, 0.4), 0.6, 5, 3)(0, 0);
    expect(std::abs(v - (1.0 - std::exp(-2.0))) <= 1e-12, "threshold coefficient");
  }

  {  // inhibition and pruning
    LayerParams<double> p;
    p.weights.resize(1, 5);
    p.weights << 0.1, -0.2, 0.3, 0.4, 0.5;
    p.mask = MatrixD::Ones(1, 5);
    p.bias = VectorD::Zero(1);
    const auto r = inhibit_and_prune(p, MatrixD::Ones(1, 5));
    expect(std::abs(r.quantile - 0.42) < 1e-12, "0.8 quantile");
    expect(p.mask(0, 2) == 0.0 && p.weights(0, 2) == 0.0, "prune");
    expect(std::abs(p.weights(0, 4) - 0.08) < 1e-12 && p.mask(0, 4) == 1.0, "shrink");
    LayerParams<double> q = p;
    q.weights << -0.9, 0.1, 0.2, -0.3, 0.4;
    q.mask.setOnes();
    MatrixD v = MatrixD::Zero(1, 5);
    v(0, 0) = 0.5;
    inhibit_and_prune(q, v);
    expect(q.weights(0, 0) < 0.0, "sign kept");
  }

  Verdict out;
  out.pass = failed.empty();
  out.detail = failed.empty() ? "all hand cases and 1000 pairwise histories match"
                              : "mismatch: " + failed.front();
  return out;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

double gradient_error(std::uint64_t seed) {
  Rng rng(seed);
  const int in = 2 + static_cast<int>(rng.below(4));
  const int out = 2 + static_cast<int>(rng.below(4));
  SpikingMlp<double> mlp({in, out}, 0, 4, PlifConfig{}, 2.0, seed % 2 == 1, rng);
  MatrixD x(in, 3), y(out, 3);
  for (Index i = 0; i < x.size(); ++i) x(i) = rng.uniform();
  for (Index i = 0; i < y.size(); ++i) y(i) = rng.uniform();
  mlp.neurons()[0].tau_raw() = rng.uniform(-1.0, 3.0);
  auto& p = mlp.layers()[0];
  for (Index i = 0; i < p.bias.size(); ++i) p.bias(i) = rng.uniform(-0.2, 0.2);
  SpikingMlp<double>::Grads g;
  mlp.loss_and_grads(x, LossKind::kMeanSquaredError, {}, y, SpikeMode::kRelaxed, g);
  auto loss = [&] {
    SpikingMlp<double>::Grads tmp;
    return mlp.loss_and_grads(x, LossKind::kMeanSquaredError, {}, y, SpikeMode::kRelaxed, tmp);
  };
  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double& value, double analytic) {
    const double saved = value;
    value = saved + h;
    const double up = loss();
    value = saved - h;
    const double down = loss();
    value = saved;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2 * h)));
  };
  for (Index i = 0; i < p.weights.size(); ++i) probe(p.weights(i), g.layers[0].weights(i));
  for (Index i = 0; i < p.bias.size(); ++i) probe(p.bias(i), g.layers[0].bias(i));
  for (Index i = 0; i < p.gain.size(); ++i) probe(p.gain(i), g.layers[0].gain(i));
  probe(mlp.neurons()[0].tau_raw(), g.tau[0]);
  return worst;
}

Verdict criterion_gradients() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) worst = std::max(worst, gradient_error(seed));
  return {worst < 1e-4, "max relative error " + std::to_string(worst) + " over 20 layers"};
}

// ---------------------------------------------------------------- runs

struct RunKey {
  RunMode mode = RunMode::kFull;
  double overlap = 1.0;
  std::uint64_t seed = 1;

  std::string name() const {
    return to_string(mode) + "_ov" + fmt(overlap, 1) + "_s" + std::to_string(seed);
  }
};

struct RunResult {
  RunKey key;
  std::string dir;
  RunConfig config;
  std::vector<PhaseRecord> ledger;
  double seconds = 0.0;  // wall time when computed in this process or stored
};

class RunBank {
 public:
  RunBank(std::string root, bool quick) : root_(std::move(root)), quick_(quick) {}

  RunConfig config_for(const RunKey& k) const {
    RunConfig c;
    c.run.mode = k.mode;
    c.run.seed = k.seed;
    c.suite.overlap = k.overlap;
    if (quick_) {
      c.suite.train_size = 200;
      c.suite.val_size = 50;
      c.suite.test_size = 100;
      c.train.epochs = 2;
      c.train.fine_tune_epochs = 2;
      c.evolution.episodes = 2;
      c.evolution.burst_epochs = 1;
      c.plasticity.probe_size = 32;
    }
    return c;
  }

  const RunResult& get(const RunKey& k) {
    const std::string name = k.name();
    if (auto it = cache_.find(name); it != cache_.end()) return it->second;
    RunResult r;
    r.key = k;
    r.config = config_for(k);
    r.dir = (fs::path(root_) / name).string();
    const std::string echo = echo_config(r.config);
    const fs::path cfg_path = fs::path(r.dir) / "effective.cfg";
    const fs::path time_path = fs::path(r.dir) / "wall_seconds.txt";
    const bool reusable = fs::exists(cfg_path) && read_file(cfg_path.string()) == echo &&
                          fs::exists(fs::path(r.dir) / "checkpoint.tdmcl");
    RunOptions o;
    o.out_dir = r.dir;
    o.threads = worker_threads();
    std::ofstream log;
    if (!reusable) {
      fs::remove_all(r.dir);
      fs::create_directories(r.dir);
    }
    log.open(fs::path(r.dir) / "progress.log", std::ios::app);
    o.progress = &log;
    std::cerr << "  run " << name << (reusable ? " (resuming or reusing)" : "") << std::endl;
    const auto start = std::chrono::steady_clock::now();
    const RunOutcome out = reusable ? resume_run(o) : run_continual(r.config, o);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.complete) throw std::runtime_error("run " + name + " did not complete");
    if (out.phases_executed == phase_schedule(r.config).size()) {
      std::ofstream(time_path) << seconds << "\n";
      r.seconds = seconds;
    } else if (fs::exists(time_path)) {
      std::ifstream(time_path) >> r.seconds;
    } else {
      r.seconds = std::nan("");
    }
    r.ledger = read_ledger((fs::path(r.dir) / "ledger.jsonl").string());
    return cache_.emplace(name, std::move(r)).first->second;
  }

  std::vector<Dataset> suite(const RunResult& r) const {
    SuiteConfig sc = r.config.suite;
    return load_or_generate_suite(sc, r.config.run.tasks, r.dir);
  }

  std::string root() const { return root_; }
  bool quick() const { return quick_; }

 private:
  std::string root_;
  bool quick_;
  std::map<std::string, RunResult> cache_;
};

std::map<int, double> metrics_of(const PhaseRecord& r) {
  return {r.metrics.begin(), r.metrics.end()};
}

// Metric of each task right after its own train phase.
std::map<int, double> own_metrics(const std::vector<PhaseRecord>& ledger) {
  std::map<int, double> out;
  for (const auto& r : ledger)
    if (r.phase == Phase::kTrain) out[r.task] = metrics_of(r).at(r.task);
  return out;
}

std::map<int, double> final_metrics(const std::vector<PhaseRecord>& ledger) {
  return metrics_of(ledger.back());
}

double mean(const std::vector<double>& v) {
  return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

// ---------------------------------------------------------------- criteria

Verdict criterion_sparsity(RunBank& bank) {
  ChoiceMatrix m = init_choice_matrix(9);
  Rng rng(2024);
  int none = 0, draws = 0;
  while (draws < 10000)
    for (const auto& c : sample_wiring(m, rng)) {
      if (draws == 10000) break;
      none += !c.connects();
      ++draws;
    }
  const double freq = none / static_cast<double>(draws);
  bool pass = std::abs(freq - 0.5) <= 0.02;
  std::string detail = "uniform no-connection frequency " + fmt(freq, 4) + "; finalized";
  for (std::uint64_t s : kSeeds) {
    const double sp = bank.get({RunMode::kFull, 1.0, s}).ledger.back().long_range_sparsity;
    pass = pass && sp >= 0.35 && sp <= 0.65;
    detail += " " + fmt(sp, 3);
  }
  return {pass, detail + " (need [0.35, 0.65])"};
}

Verdict criterion_curve(RunBank& bank) {
  bool pass = true;
  std::string detail = "peak phase / last phase:";
  for (std::uint64_t s : kSeeds) {
    const auto& ledger = bank.get({RunMode::kFull, 1.0, s}).ledger;
    std::vector<double> active;
    for (const auto& r : ledger) active.push_back(static_cast<double>(r.local_active));
    const auto peak = std::max_element(active.begin(), active.end()) - active.begin();
    const bool interior = peak > 0 && peak + 1 < static_cast<long>(active.size()) &&
                          active[peak] > active.back() && active[peak] > active.front();
    pass = pass && interior;
    detail += " " + std::to_string(peak) + "/" + std::to_string(active.size() - 1) + " (" +
              std::to_string(static_cast<long>(active[peak])) + " -> " +
              std::to_string(static_cast<long>(active.back())) + ")";
  }
  return {pass, detail};
}

Verdict criterion_forgetting(RunBank& bank) {
  std::vector<double> drops;
  bool invariant = true, above_chance = true;
  std::string worst;
  double worst_margin = 1e9;
  for (std::uint64_t s : kSeeds) {
    const RunResult& run = bank.get({RunMode::kFull, 1.0, s});
    const auto& ledger = run.ledger;
    for (std::size_t i = 1; i < ledger.size(); ++i) {
      if (ledger[i].phase == Phase::kPrune) continue;
      const auto before = metrics_of(ledger[i - 1]);
      for (const auto& [t, v] : ledger[i].metrics)
        if (t != ledger[i].task && before.count(t) && before.at(t) != v) invariant = false;
    }
    const auto own = own_metrics(ledger);
    const auto fin = final_metrics(ledger);
    const auto suite = bank.suite(run);
    for (const auto& [t, v] : fin) {
      if (t == run.config.run.tasks) continue;
      drops.push_back(own.at(t) - v);
      const auto& d = suite[t - 1];
      const double chance = chance_points(d.spec, d.train, d.test, run.config.suite.command_tolerance);
      const double margin = v - chance;
      if (margin < worst_margin) {
        worst_margin = margin;
        worst = "seed " + std::to_string(s) + " task " + std::to_string(t) + " at " + fmt(v) +
                " vs chance " + fmt(chance);
      }
      if (margin <= 2.0) above_chance = false;
    }
  }
  const double avg = mean(drops);
  const double max_drop = *std::max_element(drops.begin(), drops.end());
  return {invariant && avg <= 5.0 && above_chance,
          "mean drop " + fmt(avg) + " (max " + fmt(max_drop) + ", need <= 5); closest to chance: " +
              worst + (invariant ? "" : "; metrics changed outside prune phases")};
}

struct TransferStats {
  int not_worse = 0;
  int better = 0;
  std::string detail;
};

TransferStats transfer(RunBank& bank, double overlap) {
  TransferStats st;
  std::map<int, std::vector<double>> diffs;
  for (std::uint64_t s : kSeeds) {
    // Each task as learned, before later pruning rounds touch it.
    const auto full = own_metrics(bank.get({RunMode::kFull, overlap, s}).ledger);
    const auto direct = own_metrics(bank.get({RunMode::kDirectTraining, overlap, s}).ledger);
    for (int t = 4; t <= 9; ++t) diffs[t].push_back(full.at(t) - direct.at(t));
  }
  for (const auto& [t, d] : diffs) {
    const double m = mean(d);
    st.not_worse += m >= -1.0;
    st.better += m > 0.0;
    st.detail += " T" + std::to_string(t) + ":" + (m >= 0 ? "+" : "") + fmt(m);
  }
  return st;
}

Verdict criterion_transfer(RunBank& bank) {
  const TransferStats on = transfer(bank, 1.0);
  const TransferStats off = transfer(bank, 0.0);
  const bool holds = on.not_worse == 6 && on.better >= 4;
  const bool control_holds = off.not_worse == 6 && off.better >= 4;
  return {holds && !control_holds,
          "full - direct, seed mean:" + on.detail + " (better on " + std::to_string(on.better) +
              "/6); control overlap 0:" + off.detail + " (better on " +
              std::to_string(off.better) + "/6" + (control_holds ? ", superiority persists)" : ")")};
}

Verdict criterion_ablation(RunBank& bank) {
  bool more_params = true;
  std::vector<double> full_avg, free_avg;
  std::string detail = "active full/no-inhibition:";
  for (std::uint64_t s : kSeeds) {
    const auto& f = bank.get({RunMode::kFull, 1.0, s}).ledger.back();
    const auto& n = bank.get({RunMode::kNoInhibition, 1.0, s}).ledger.back();
    more_params = more_params && n.local_active > f.local_active;
    full_avg.push_back(f.average.value_or(std::nan("")));
    free_avg.push_back(n.average.value_or(std::nan("")));
    detail += " " + std::to_string(f.local_active) + "/" + std::to_string(n.local_active);
  }
  const double fa = mean(full_avg), na = mean(free_avg);
  return {more_params && fa >= na - 2.0,
          detail + "; average metric full " + fmt(fa) + " vs no-inhibition " + fmt(na)};
}

std::vector<KernelStat> read_kernels(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<KernelStat> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) continue;
    KernelStat k;
    k.task = std::stoi(cells[0]);
    k.block = std::stoi(cells[1]);
    k.layer = cells[2];
    k.out_channel = std::stoi(cells[3]);
    k.in_channel = std::stoi(cells[4]);
    k.mean_h = std::stod(cells[5]);
    k.pruned_fraction = std::stod(cells[6]);
    out.push_back(k);
  }
  return out;
}

Verdict criterion_correlation(RunBank& bank) {
  std::vector<KernelStat> pooled;
  for (std::uint64_t s : kSeeds) {
    const auto rows = read_kernels(
        (fs::path(bank.get({RunMode::kFull, 1.0, s}).dir) / "kernels.csv").string());
    pooled.insert(pooled.end(), rows.begin(), rows.end());
  }
  const RankCorrelation c = correlate_plasticity_pruning(pooled);
  return {c.n > 2 && c.rho < 0.0 && c.p_value < 0.05,
          "pooled Spearman rho " + fmt(c.rho, 4) + ", p " + std::to_string(c.p_value) +
              ", kernels " + std::to_string(c.n)};
}

Verdict criterion_fine_tune(RunBank& bank) {
  int recovered = 0;
  std::string detail;
  for (std::uint64_t s : kSeeds) {
    const RunResult& run = bank.get({RunMode::kFull, 1.0, s});
    const PhaseRecord& last = run.ledger.back();
    std::map<int, std::pair<Index, Index>> column;  // task -> (total, active)
    for (const auto& b : last.blocks) {
      column[b.task].first += b.total_weights;
      column[b.task].second += b.active_weights;
    }
    int chosen = 0;
    double pruned = 0.0;
    for (const auto& [t, c] : column) {
      const double frac = 1.0 - static_cast<double>(c.second) / c.first;
      if (frac >= 0.40) {
        chosen = t;
        pruned = frac;
        break;
      }
    }
    detail += " seed " + std::to_string(s) + ":";
    if (chosen == 0) {
      detail += " no task >= 40% pruned;";
      continue;
    }
    RunState state = read_checkpoint((fs::path(run.dir) / "checkpoint.tdmcl").string());
    const auto suite = bank.suite(run);
    const double pre = own_metrics(run.ledger).at(chosen);
    const FineTuneResult ft = fine_tune(state, suite, chosen, run.config.train.fine_tune_epochs,
                                        worker_threads());
    const bool ok = ft.after >= pre;
    recovered += ok;
    detail += " T" + std::to_string(chosen) + " (" + fmt(100 * pruned, 1) + "% pruned) " +
              fmt(ft.before) + " -> " + fmt(ft.after) + " vs pre-pruning " + fmt(pre) + ";";
  }
  return {recovered >= 2, std::to_string(recovered) + "/3 recovered;" + detail};
}

Verdict criterion_budget(RunBank& bank) {
  double total = 0.0;
  for (std::uint64_t s : kSeeds) total += bank.get({RunMode::kFull, 1.0, s}).seconds;

  // Split the seed-1 run at an arbitrary boundary and resume it in a fresh
  // directory; the ledger prefix must match the uninterrupted run byte for byte.
  const RunResult& ref = bank.get({RunMode::kFull, 1.0, 1});
  const fs::path dir = fs::path(bank.root()) / "resume_check";
  fs::remove_all(dir);
  RunOptions o;
  o.out_dir = dir.string();
  o.threads = worker_threads();
  o.stop_after = 6;
  run_continual(ref.config, o);
  o.stop_after = 5;
  resume_run(o);
  const std::string split = read_file((dir / "ledger.jsonl").string());
  const std::string whole = read_file((fs::path(ref.dir) / "ledger.jsonl").string());
  const bool exact = whole.compare(0, split.size(), split) == 0 &&
                     std::count(split.begin(), split.end(), '\n') == 11;
  fs::remove_all(dir);
  const bool timed = std::isfinite(total);
  return {timed && total <= 3600.0 && exact,
          "3 full runs " + (timed ? fmt(total / 60.0, 1) + " min" : std::string("untimed (reused)")) +
              " with " + std::to_string(worker_threads()) + " thread(s); split-and-resume ledger " +
              (exact ? "bit-identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  const char* dir_env = std::getenv("TDMCL_ACCEPT_DIR");
  const std::string root = argc > 1 ? argv[1] : dir_env ? dir_env : "acceptance_runs";
  const bool quick = env_flag("TDMCL_ACCEPT_QUICK");
  std::set<int> only;
  if (const char* o = std::getenv("TDMCL_ACCEPT_ONLY")) {
    std::stringstream ss(o);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) only.insert(std::stoi(item));
  }
  fs::create_directories(root);
  RunBank bank(root, quick);
  if (quick) std::cout << "quick mode: budgets reduced, results are not meaningful\n";

  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, [] { return criterion_oracles(); }},
      {2, [] { return criterion_gradients(); }},
      // The budget criterion goes first among the run-based ones so its timing
      // covers fresh runs.
      {10, [&] { return criterion_budget(bank); }},
      {3, [&] { return criterion_sparsity(bank); }},
      {4, [&] { return criterion_curve(bank); }},
      {5, [&] { return criterion_forgetting(bank); }},
      {6, [&] { return criterion_transfer(bank); }},
      {7, [&] { return criterion_ablation(bank); }},
      {8, [&] { return criterion_correlation(bank); }},
      {9, [&] { return criterion_fine_tune(bank); }},
  };
  std::map<int, Verdict> verdicts;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    try {
      verdicts[id] = fn();
    } catch (const std::exception& e) {
      verdicts[id] = {false, std::string("error: ") + e.what()};
    }
    std::cerr << "  criterion " << id << " evaluated" << std::endl;
  }
  int failures = 0;
  for (const auto& [id, v] : verdicts) {
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << v.detail << "\n";
    failures += !v.pass;
  }
  std::cout << (verdicts.size() - failures) << "/" << verdicts.size() << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}
