#include <filesystem>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "tdmcl/binary_io.hpp"
#include "tdmcl/runner.hpp"
#include "tdmcl/training.hpp"

namespace fs = std::filesystem;
using namespace tdmcl;

namespace {

RunConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  return path.empty() ? parse_config("", overrides, "defaults") : load_config(path, overrides);
}

void print_outcome(const RunOutcome& o) {
  if (o.complete) {
    std::cout << "run complete (" << o.phases_executed << " phases this invocation)\n";
  } else {
    std::cout << "stopped after " << o.phases_executed << " phases; continue with `resume`\n";
  }
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Task-driven modular continual learning for spiking networks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint;
  std::vector<std::string> overrides;
  int stop_after = -1, task = 0, epochs = -1;
  std::uint64_t seed = 1;

  auto* gen = app.add_subcommand("gen-suite", "Generate the task suite into OUT/suite");
  gen->add_option("-c,--config", config_path, "Config file (suite.* keys)");
  gen->add_option("--set", overrides, "key=value override (repeatable)");
  auto* seed_opt = gen->add_option("--seed", seed, "Suite seed (overrides suite.seed)");
  gen->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Run the continual-learning protocol");
  run->add_option("-c,--config", config_path, "Config file");
  run->add_option("--set", overrides, "key=value override (repeatable)");
  run->add_option("-o,--out", out_dir, "Output directory")->required();
  run->add_option("--stop-after", stop_after, "Stop after this many phases");

  auto* resume = app.add_subcommand("resume", "Continue a run from OUT/checkpoint.tdmcl");
  resume->add_option("-o,--out", out_dir, "Run directory")->required();
  resume->add_option("--stop-after", stop_after, "Stop after this many phases");

  auto* eval = app.add_subcommand("eval", "Evaluate learned tasks of a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--task", task, "Only this task");

  auto* tune = app.add_subcommand("fine-tune", "Fine-tune one task of a checkpoint");
  tune->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  tune->add_option("--task", task, "Task to fine-tune")->required();
  tune->add_option("--epochs", epochs, "Epochs (default train.fine_tune_epochs)");
  tune->add_option("-o,--out", out_dir, "Write the tuned checkpoint here");

  auto* report = app.add_subcommand("report", "Write CSV reports from OUT/ledger.jsonl");
  report->add_option("-o,--out", out_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  RunOptions opts;
  opts.out_dir = out_dir;
  opts.stop_after = stop_after;
  opts.progress = &std::cout;
  opts.threads = worker_threads();

  if (*gen) {
    RunConfig cfg = load(config_path, overrides);
    if (*seed_opt) cfg.suite.seed = seed;
    validate(cfg);
    const std::vector<Dataset> suite = generate_suite(cfg.suite);
    write_suite(suite, cfg.suite, (fs::path(out_dir) / "suite").string());
    std::cout << "wrote " << suite.size() << " tasks to " << (fs::path(out_dir) / "suite").string()
              << "\n";
    return kExitOk;
  }
  if (*run) {
    print_outcome(run_continual(load(config_path, overrides), opts));
    return kExitOk;
  }
  if (*resume) {
    print_outcome(resume_run(opts));
    return kExitOk;
  }
  if (*eval || *tune) {
    RunState state = read_checkpoint(checkpoint);
    SuiteConfig sc = state.config.suite;
    const std::string run_dir = fs::path(checkpoint).parent_path().string();
    const std::vector<Dataset> suite = load_or_generate_suite(sc, state.graph.tasks(), run_dir);
    std::cout << std::fixed << std::setprecision(4);
    if (*tune) {
      const int n = epochs >= 0 ? epochs : state.config.train.fine_tune_epochs;
      const FineTuneResult r = fine_tune(state, suite, task, n);
      std::cout << "task " << task << " before " << r.before << " after " << r.after << " delta "
                << r.delta() << "\n";
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_checkpoint((fs::path(out_dir) / "checkpoint.tdmcl").string(), state);
      }
      return kExitOk;
    }
    if (task != 0) {
      if (task < 1 || task > state.graph.tasks())
        throw ConfigError("eval: checkpoint has no column for task " + std::to_string(task));
      std::cout << evaluate_task(state, suite, task) << "\n";
      return kExitOk;
    }
    for (int t = 1; t <= state.graph.tasks(); ++t)
      std::cout << "task " << t << " " << evaluate_task(state, suite, t) << "\n";
    return kExitOk;
  }
  if (*report) {
    const std::string ledger = (fs::path(out_dir) / "ledger.jsonl").string();
    if (!fs::exists(ledger)) throw IoError("no ledger at '" + ledger + "'");
    write_reports(out_dir, read_ledger(ledger), nullptr);
    std::cout << "reports written to " << out_dir << "\n";
    return kExitOk;
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
