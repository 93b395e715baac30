#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tdmcl/common.hpp"

namespace tdmcl {

enum class Family { kPerception, kMotor, kInteraction };
enum class OutputKind { kClassLogits, kActionVector, kCommandSequence };
enum class MetricKind { kAccuracy, kNegativeMse, kSuccessRate };

std::string to_string(Family f);
std::string to_string(OutputKind k);
std::string to_string(MetricKind m);

// Which earlier tasks a task's generative factors are tied to, and how
// strongly. `strength` is the probability that a sample draws its object from
// the shared shape vocabulary and the fraction of pixels left in place (the
// rest are shuffled by a fixed task-private permutation).
struct OverlapSpec {
  std::vector<int> shared_with;
  double strength = 1.0;
};

struct TaskSpec {
  int task_id = 0;
  Family family = Family::kPerception;
  std::string name;
  int channels = 3;
  int height = 16;
  int width = 16;
  int state_dim = 0;
  OutputKind output_kind = OutputKind::kClassLogits;
  int num_classes = 0;  // K for class logits
  int action_dim = 0;   // D
  int horizon = 0;      // L for command sequences
  MetricKind metric = MetricKind::kAccuracy;
  OverlapSpec overlap;

  int input_size() const { return channels * height * width; }
  // Rows of the regression target (0 for classification).
  int target_dim() const {
    if (output_kind == OutputKind::kClassLogits) return 0;
    if (output_kind == OutputKind::kActionVector) return action_dim;
    return horizon * action_dim;
  }
  // Width of the readout head.
  int head_outputs() const {
    return output_kind == OutputKind::kClassLogits ? num_classes : target_dim();
  }
};

// One split. Inputs are (input_size x n); each column is an image in
// (y, x, channel) order so it maps directly onto a (channels x pixels) block.
struct Split {
  MatrixF inputs;
  MatrixF states;            // (state_dim x n), empty rows when no state
  std::vector<int> labels;   // classification
  MatrixF targets;           // (target_dim x n), regression

  Index size() const { return inputs.cols(); }
};

struct Dataset {
  TaskSpec spec;
  std::uint64_t generator_seed = 0;
  Split train;
  Split val;
  Split test;
};

struct SuiteConfig {
  std::uint64_t seed = 1;
  int train_size = 2000;
  int val_size = 250;
  int test_size = 500;
  double overlap = 1.0;
  double command_tolerance = 0.1;
};

void validate(const SuiteConfig& cfg);

// The nine default task specs, in protocol order.
std::vector<TaskSpec> default_specs(double overlap);

std::vector<Dataset> generate_suite(const SuiteConfig& cfg);
Dataset generate_task(const TaskSpec& spec, const SuiteConfig& cfg);

// Scripted goal checker for command sequences: an episode succeeds when every
// element of every step lies within `tolerance` of the scripted trajectory.
struct GoalChecker {
  double tolerance = 0.1;
  bool accepts(const Eigen::Ref<const VectorF>& predicted,
               const Eigen::Ref<const VectorF>& scripted) const;
};

double success_rate(const MatrixF& predicted, const MatrixF& scripted,
                    const GoalChecker& checker);
double accuracy(const MatrixF& logits, const std::vector<int>& labels);
double regression_mse(const MatrixF& predicted, const MatrixF& targets);

// Task metric in points: accuracy and success rate in percent; regression as
// -100 * MSE / Var(targets), so the mean predictor scores about -100.
// Higher is better for all three.
double metric_points(const TaskSpec& spec, const MatrixF& outputs, const Split& split,
                     double command_tolerance);
// Metric of the best constant predictor (majority class / mean target /
// mean trajectory) fitted on `train` and scored on `test`.
double chance_points(const TaskSpec& spec, const Split& train, const Split& test,
                     double command_tolerance);

// Dataset container ("TDMD1").
std::string encode_dataset(const Dataset& d);
Dataset decode_dataset(std::string_view bytes, const std::string& what);
void write_dataset(const std::string& path, const Dataset& d);
Dataset read_dataset(const std::string& path);

std::uint64_t dataset_digest(const Dataset& d);

// Suite manifest CSV. `learned` holds direct-training scores per task (may be
// empty, then the column is left blank).
std::string suite_manifest_csv(const std::vector<Dataset>& suite, const SuiteConfig& cfg,
                               const std::vector<double>& learned = {});

}  // namespace tdmcl
