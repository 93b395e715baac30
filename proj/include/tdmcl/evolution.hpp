#pragma once

#include <array>
#include <string>
#include <vector>

#include "tdmcl/common.hpp"
#include "tdmcl/rng.hpp"

namespace tdmcl {

// Six-way connection choice for one (destination block, earlier task) pair.
// Options 0..2 mean "no connection"; options 3..5 connect to the output of
// source block 2, 3, 4 of the earlier task.
inline constexpr int kOptions = 6;
inline constexpr int kNoConnectOptions = 3;

using ChoiceVector = Eigen::Matrix<double, kOptions, 1>;

inline bool is_connect_option(int option) { return option >= kNoConnectOptions; }
inline int source_block_of(int option) {
  return is_connect_option(option) ? option - kNoConnectOptions + 2 : 0;
}
inline int option_for_source_block(int block) { return block - 2 + kNoConnectOptions; }

struct WiringChoice {
  int dest_block = 2;   // 2..4, in the new task's column
  int source_task = 1;  // 1-based, earlier than the new task
  int option = 0;       // 0..5

  bool connects() const { return is_connect_option(option); }
  int source_block() const { return source_block_of(option); }
  bool operator==(const WiringChoice&) const = default;
};

// Which losses feed the min-max window behind h_l.
enum class NormalizationScope { kOption, kRow, kTask };

std::string to_string(NormalizationScope scope);
NormalizationScope parse_normalization_scope(const std::string& text);

struct OptionHistory {
  int count = 0;               // h_n
  std::vector<double> losses;  // one per episode that sampled this option
};

struct RowHistory {
  std::array<OptionHistory, kOptions> options;
  std::vector<double> losses;  // every episode loss seen by this row
};

// Probability state for task t: 3*(t-1) rows of 6, ordered dest block major
// (row = (dest_block-2)*(t-1) + (source_task-1)).
struct ChoiceMatrix {
  int task = 2;
  Eigen::Matrix<double, Eigen::Dynamic, kOptions, Eigen::RowMajor> p;
  std::vector<RowHistory> history;
  std::vector<double> task_losses;
  int episodes = 0;

  int rows() const { return static_cast<int>(p.rows()); }
  int earlier_tasks() const { return task - 1; }
  int row_index(int dest_block, int source_task) const {
    return (dest_block - 2) * earlier_tasks() + (source_task - 1);
  }
  int dest_block_of_row(int row) const { return 2 + row / earlier_tasks(); }
  int source_task_of_row(int row) const { return 1 + row % earlier_tasks(); }
};

ChoiceMatrix init_choice_matrix(int task);

// One categorical draw per row, rows in order.
std::vector<WiringChoice> sample_wiring(const ChoiceMatrix& matrix, Rng& rng);

// Appends the episode outcome to every sampled option's history.
void record_episode(ChoiceMatrix& matrix, const std::vector<WiringChoice>& sampled,
                    double episode_loss);

// h_l = 1 - Normalize01(latest loss of the option) within the scope's window.
// Degenerate windows and never-sampled options give 0.5.
double performance_score(const ChoiceMatrix& matrix, int row, int option,
                         NormalizationScope scope);

struct PairwiseCounts {
  Eigen::VectorXd plus;   // dp+
  Eigen::VectorXd minus;  // dp-
};

// Antisymmetric difference matrix v - v^T.
Eigen::MatrixXd pairwise_difference(const Eigen::VectorXd& v);

// dp+_i counts opponents j that option i beats while having been used less;
// dp-_i counts opponents it loses to while having been used more.
PairwiseCounts pairwise_counts(const Eigen::VectorXd& h_n, const Eigen::VectorXd& h_l);

// p <- softmax(p + gamma * (dp+ - dp-)).
Eigen::VectorXd update_probabilities(const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& h_n,
                                     const Eigen::VectorXd& h_l, double gamma);

// Applies update_probabilities independently to every row using its history.
void update_choice_matrix(ChoiceMatrix& matrix, double gamma, NormalizationScope scope);

// Argmax per row; ties go to the lowest option index.
std::vector<WiringChoice> finalize_wiring(const ChoiceMatrix& matrix);

// Fraction of choices that decode to "no connection".
double long_range_sparsity(const std::vector<WiringChoice>& choices);

void validate_row(const ChoiceMatrix& matrix, int row);

}  // namespace tdmcl
