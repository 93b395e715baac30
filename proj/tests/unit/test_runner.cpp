#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tdmcl/binary_io.hpp"
#include "tdmcl/runner.hpp"
#include "tdmcl/training.hpp"

namespace tdmcl {
namespace {

namespace fs = std::filesystem;

RunConfig tiny(RunMode mode = RunMode::kFull, int tasks = 3) {
  RunConfig c;
  c.suite.train_size = 48;
  c.suite.val_size = 16;
  c.suite.test_size = 32;
  c.train.epochs = 1;
  c.train.batch_size = 16;
  c.train.fine_tune_epochs = 1;
  c.evolution.episodes = 2;
  c.evolution.burst_epochs = 1;
  c.plasticity.probe_size = 16;
  c.run.tasks = tasks;
  c.run.mode = mode;
  c.run.seed = 5;
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& leaf = "") const { return (path / leaf).string(); }
};

std::string slurp(const std::string& path) { return read_file(path); }

int lines(const std::string& text) { return static_cast<int>(std::count(text.begin(), text.end(), '\n')); }

RunOutcome run_in(const RunConfig& c, const std::string& dir, int stop_after = -1) {
  RunOptions o;
  o.out_dir = dir;
  o.stop_after = stop_after;
  return run_continual(c, o);
}

TEST_CASE("protocol shape of a nine-task full run") {
  const RunConfig c;
  const auto s = phase_schedule(c);
  std::map<Phase, int> counts;
  for (const auto& p : s) ++counts[p.phase];
  CHECK(counts[Phase::kGrow] == 9);
  CHECK(counts[Phase::kEvolve] == 8);
  CHECK(counts[Phase::kTrain] == 9);
  CHECK(counts[Phase::kPrune] == 8);
  CHECK(s.size() == 34);
  std::string tags;
  for (const auto& p : s) tags += to_string(p.phase) + " ";
  std::string expected = "grow train ";
  for (int t = 2; t <= 9; ++t) expected += "grow evolve train prune ";
  CHECK(tags == expected);
  CHECK(s.size() - counts[Phase::kGrow] == 25);
}

TEST_CASE("mode schedules and budgets") {
  RunConfig c;
  auto count = [](const RunConfig& cfg, Phase ph) {
    int n = 0;
    for (const auto& p : phase_schedule(cfg)) n += p.phase == ph;
    return n;
  };
  c.run.mode = RunMode::kNoInhibition;
  CHECK(count(c, Phase::kPrune) == 0);
  CHECK(count(c, Phase::kEvolve) == 8);
  c.run.mode = RunMode::kDirectTraining;
  CHECK(count(c, Phase::kPrune) == 0);
  CHECK(count(c, Phase::kEvolve) == 0);
  CHECK(train_phase_epochs(c, 1) == 30);
  CHECK(train_phase_epochs(c, 2) == 30 + 8 * 5);
  c.run.mode = RunMode::kDirectPruning;
  CHECK(count(c, Phase::kPrune) == 8);
  CHECK(count(c, Phase::kEvolve) == 0);
  c.run.mode = RunMode::kFull;
  CHECK(train_phase_epochs(c, 2) == 30);
  c.plasticity.cadence = 2;
  CHECK(count(c, Phase::kPrune) == 4);
  c.run.tasks = 1;
  CHECK(phase_schedule(c) == std::vector<PhaseStep>{{Phase::kGrow, 1}, {Phase::kTrain, 1}});
}

TEST_CASE("tiny full run: ledger, reports, invariants") {
  TempDir dir("tdmcl_run_full");
  const RunConfig c = tiny();
  const RunOutcome o = run_in(c, dir.str());
  CHECK(o.complete);
  const auto schedule = phase_schedule(c);
  const auto ledger = read_ledger(dir.str("ledger.jsonl"));
  REQUIRE(ledger.size() == schedule.size());
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    CHECK(ledger[i].index == static_cast<int>(i));
    CHECK(ledger[i].phase == schedule[i].phase);
    CHECK(ledger[i].task == schedule[i].task);
    CHECK(ledger[i].long_range_sparsity >= 0.0);
    CHECK(ledger[i].long_range_sparsity <= 1.0);
  }
  CHECK(lines(slurp(dir.str("summary.csv"))) == 1 + static_cast<int>(schedule.size()) - 3);
  CHECK(lines(slurp(dir.str("ledger.csv"))) == 1 + static_cast<int>(schedule.size()));
  CHECK(lines(slurp(dir.str("choices.csv"))) == 1 + (3 + 6) * 6);
  CHECK(lines(slurp(dir.str("pruning.csv"))) == 1 + (1 + 2) * 4);
  CHECK(lines(slurp(dir.str("kernels.csv"))) > 1);
  CHECK(parse_config(slurp(dir.str("effective.cfg"))) == c);

  // Earlier-task metrics change only in prune phases.
  for (std::size_t i = 1; i < ledger.size(); ++i) {
    if (ledger[i].phase == Phase::kPrune) continue;
    for (const auto& [t, v] : ledger[i - 1].metrics) {
      if (t == ledger[i].task) continue;
      for (const auto& [u, w] : ledger[i].metrics)
        if (u == t) CHECK(w == v);
    }
  }
  // Masks only ever shrink.
  for (std::size_t i = 1; i < ledger.size(); ++i)
    for (std::size_t b = 0; b < ledger[i - 1].blocks.size(); ++b)
      CHECK(ledger[i].blocks[b].active_weights <= ledger[i - 1].blocks[b].active_weights);

  // Ledger lines survive a parse/serialize cycle unchanged.
  std::istringstream in(slurp(dir.str("ledger.jsonl")));
  std::string line;
  while (std::getline(in, line)) CHECK(record_to_json(record_from_json(line)) == line);
}

TEST_CASE("resume reproduces the uninterrupted run bit for bit, independent of out_dir") {
  TempDir a("tdmcl_resume_a"), b("tdmcl_resume_b");
  const RunConfig c = tiny();
  run_in(c, a.str());
  const RunOutcome partial = run_in(c, b.str(), 5);
  CHECK_FALSE(partial.complete);
  CHECK(partial.phases_executed == 5);
  CHECK(read_ledger(b.str("ledger.jsonl")).size() == 5);
  // Simulate a crash that wrote a record after the last checkpoint.
  {
    std::ofstream extra(b.str("ledger.jsonl"), std::ios::app);
    extra << "{\"garbage\": true}\n";
  }
  RunOptions o;
  o.out_dir = b.str();
  o.stop_after = 2;
  CHECK_FALSE(resume_run(o).complete);
  o.stop_after = -1;
  CHECK(resume_run(o).complete);
  CHECK(slurp(a.str("ledger.jsonl")) == slurp(b.str("ledger.jsonl")));
  CHECK(slurp(a.str("checkpoint.tdmcl")) == slurp(b.str("checkpoint.tdmcl")));
  CHECK(slurp(a.str("kernels.csv")) == slurp(b.str("kernels.csv")));
}

TEST_CASE("mode differences on a tiny suite") {
  TempDir d1("tdmcl_mode_direct"), d2("tdmcl_mode_noinh"), d3("tdmcl_mode_dprune");
  const auto direct = run_in(tiny(RunMode::kDirectTraining), d1.str()).state;
  CHECK(direct.graph.edges.empty());
  CHECK(direct.choices.empty());
  const auto noinh = run_in(tiny(RunMode::kNoInhibition), d2.str()).state;
  const Census cn = parameter_census(noinh.graph);
  CHECK(cn.local_active == cn.local_total);
  const auto dprune = run_in(tiny(RunMode::kDirectPruning), d3.str()).state;
  CHECK(dprune.graph.edges.empty());
  CHECK(parameter_census(dprune.graph).local_active < parameter_census(direct.graph).local_active);
  for (const auto& r : read_ledger(d3.str("ledger.jsonl")))
    for (const auto& p : r.pruning) CHECK(p.e == 0.0);
}

TEST_CASE("checkpoint container") {
  TempDir dir("tdmcl_ckpt");
  run_in(tiny(), dir.str(), 6);
  const std::string bytes = slurp(dir.str("checkpoint.tdmcl"));
  const RunState s = decode_checkpoint(bytes, "mem");
  CHECK(s.next_phase == 6);
  CHECK(s.graph.tasks() == 2);
  CHECK(s.choices.count(2) == 1);
  CHECK(encode_checkpoint(s) == bytes);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 20), "mem"), CorruptFileError);
  std::string foreign = bytes;
  foreign.replace(0, 6, "TDMD1x");
  try {
    decode_checkpoint(foreign, "mem");
    FAIL("expected a format error");
  } catch (const CorruptFileError& e) {
    CHECK(std::string(e.what()).find("TDMCL1") != std::string::npos);
  }
}

TEST_CASE("evaluation and fine-tuning") {
  TempDir dir("tdmcl_tune");
  RunConfig c = tiny();
  RunOutcome o = run_in(c, dir.str());
  RunState& s = o.state;
  SuiteConfig sc = c.suite;
  const auto suite = load_or_generate_suite(sc, c.run.tasks, "");
  const double m1 = evaluate_task(s, suite, 1);
  CHECK(evaluate_task(s, suite, 1) == m1);

  const std::vector<int> tasks = {1, 2, 3};
  CHECK(evaluate_tasks(s.graph, tasks, suite, 0.1, 1) == evaluate_tasks(s.graph, tasks, suite, 0.1, 3));

  const FineTuneResult zero = fine_tune(s, suite, 1, 0);
  CHECK(zero.delta() == 0.0);

  std::vector<MatrixF> masks;
  for (const auto& b : s.graph.column(1).blocks)
    for (const auto* l : b.layers()) masks.push_back(l->params().mask);
  const int runs = s.graph.column(1).blocks[0].training_runs;
  const FineTuneResult r = fine_tune(s, suite, 1, 2);
  CHECK(std::isfinite(r.after));
  std::size_t i = 0;
  for (const auto& b : s.graph.column(1).blocks)
    for (const auto* l : b.layers()) {
      CHECK(l->params().mask == masks[i]);
      CHECK((l->params().weights.array() * (1.0f - masks[i].array())).cwiseAbs().maxCoeff() == 0.0f);
      ++i;
    }
  CHECK(s.graph.column(1).blocks[0].training_runs == runs + 1);
  CHECK_THROWS_AS(fine_tune(s, suite, 7, 1), ConfigError);
}

TEST_CASE("reports from an empty ledger are headers only") {
  TempDir dir("tdmcl_report_empty");
  fs::create_directories(dir.path);
  write_reports(dir.str(), {}, nullptr);
  for (const char* f : {"summary.csv", "ledger.csv", "pruning.csv", "choices.csv", "kernels.csv"})
    CHECK(lines(slurp(dir.str(f))) == 1);
}

TEST_CASE("suite files in out_dir take precedence over generation") {
  TempDir dir("tdmcl_suite_files");
  RunConfig c = tiny(RunMode::kFull, 1);
  c.suite.seed = 7;
  const auto suite = generate_suite(c.suite);
  write_suite(suite, c.suite, dir.str("suite"));
  SuiteConfig other = tiny().suite;
  other.seed = 99;
  const auto loaded = load_or_generate_suite(other, 2, dir.str());
  CHECK(other.seed == 7);
  CHECK(dataset_digest(loaded[1]) == dataset_digest(suite[1]));
}

}  // namespace
}  // namespace tdmcl
