#include "tdmcl/evolution.hpp"

#include <algorithm>
#include <cmath>

namespace tdmcl {

std::string to_string(NormalizationScope scope) {
  switch (scope) {
    case NormalizationScope::kOption:
      return "option";
    case NormalizationScope::kRow:
      return "row";
    case NormalizationScope::kTask:
      return "task";
  }
  return "row";
}

NormalizationScope parse_normalization_scope(const std::string& text) {
  if (text == "option") return NormalizationScope::kOption;
  if (text == "row") return NormalizationScope::kRow;
  if (text == "task") return NormalizationScope::kTask;
  throw ConfigError("unknown normalization scope '" + text +
                    "' (expected option, row or task)");
}

ChoiceMatrix init_choice_matrix(int task) {
  if (task < 2) {
    throw ControllerStateError(
        "init_choice_matrix: task " + std::to_string(task) +
        " has no earlier tasks; the connection controller needs t >= 2");
  }
  ChoiceMatrix m;
  m.task = task;
  m.p.setConstant(3 * (task - 1), kOptions, 1.0 / kOptions);
  m.history.assign(m.p.rows(), RowHistory{});
  return m;
}

void validate_row(const ChoiceMatrix& matrix, int row) {
  const auto r = matrix.p.row(row);
  const bool finite = r.allFinite();
  if (!finite || r.minCoeff() < 0.0 || std::abs(r.sum() - 1.0) > 1e-9) {
    throw ControllerStateError("choice matrix of task " + std::to_string(matrix.task) +
                               ": row " + std::to_string(row) +
                               " is not a probability simplex");
  }
}

std::vector<WiringChoice> sample_wiring(const ChoiceMatrix& matrix, Rng& rng) {
  std::vector<WiringChoice> out;
  out.reserve(matrix.rows());
  for (int row = 0; row < matrix.rows(); ++row) {
    validate_row(matrix, row);
    const double u = rng.uniform();
    double acc = 0.0;
    int chosen = kOptions - 1;
    for (int o = 0; o < kOptions; ++o) {
      acc += matrix.p(row, o);
      if (u < acc && matrix.p(row, o) > 0.0) {
        chosen = o;
        break;
      }
    }
    // Guard against round-off leaving u above the final cumulative sum.
    while (matrix.p(row, chosen) <= 0.0 && chosen > 0) --chosen;
    out.push_back({matrix.dest_block_of_row(row), matrix.source_task_of_row(row), chosen});
  }
  return out;
}

void record_episode(ChoiceMatrix& matrix, const std::vector<WiringChoice>& sampled,
                    double episode_loss) {
  if (!std::isfinite(episode_loss)) {
    throw ControllerStateError("record_episode: non-finite episode loss");
  }
  for (const auto& c : sampled) {
    const int row = matrix.row_index(c.dest_block, c.source_task);
    auto& h = matrix.history.at(row);
    h.options.at(c.option).count += 1;
    h.options[c.option].losses.push_back(episode_loss);
    h.losses.push_back(episode_loss);
  }
  matrix.task_losses.push_back(episode_loss);
  matrix.episodes += 1;
}

namespace {

double normalized_performance(double loss, const std::vector<double>& window) {
  const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
  if (!(*hi > *lo)) return 0.5;
  return 1.0 - (loss - *lo) / (*hi - *lo);
}

}  // namespace

double performance_score(const ChoiceMatrix& matrix, int row, int option,
                         NormalizationScope scope) {
  const auto& h = matrix.history.at(row);
  const auto& opt = h.options.at(option);
  if (opt.losses.empty()) return 0.5;
  const double latest = opt.losses.back();
  switch (scope) {
    case NormalizationScope::kOption:
      return normalized_performance(latest, opt.losses);
    case NormalizationScope::kRow:
      return normalized_performance(latest, h.losses);
    case NormalizationScope::kTask:
      return normalized_performance(latest, matrix.task_losses);
  }
  return 0.5;
}

Eigen::MatrixXd pairwise_difference(const Eigen::VectorXd& v) {
  const Index n = v.size();
  return v.replicate(1, n) - v.transpose().replicate(n, 1);
}

PairwiseCounts pairwise_counts(const Eigen::VectorXd& h_n, const Eigen::VectorXd& h_l) {
  const Eigen::MatrixXd dn = pairwise_difference(h_n);
  const Eigen::MatrixXd dl = pairwise_difference(h_l);
  PairwiseCounts c;
  c.plus = ((dn.array() < 0.0) && (dl.array() > 0.0)).cast<double>().rowwise().sum();
  c.minus = ((dn.array() > 0.0) && (dl.array() < 0.0)).cast<double>().rowwise().sum();
  return c;
}

Eigen::VectorXd update_probabilities(const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& h_n,
                                     const Eigen::VectorXd& h_l, double gamma) {
  const PairwiseCounts c = pairwise_counts(h_n, h_l);
  const Eigen::VectorXd logits = p + gamma * (c.plus - c.minus);
  const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

void update_choice_matrix(ChoiceMatrix& matrix, double gamma, NormalizationScope scope) {
  for (int row = 0; row < matrix.rows(); ++row) {
    Eigen::VectorXd h_n(kOptions), h_l(kOptions);
    for (int o = 0; o < kOptions; ++o) {
      h_n(o) = matrix.history[row].options[o].count;
      h_l(o) = performance_score(matrix, row, o, scope);
    }
    const Eigen::VectorXd p = matrix.p.row(row).transpose();
    matrix.p.row(row) = update_probabilities(p, h_n, h_l, gamma).transpose();
  }
}

std::vector<WiringChoice> finalize_wiring(const ChoiceMatrix& matrix) {
  std::vector<WiringChoice> out;
  for (int row = 0; row < matrix.rows(); ++row) {
    validate_row(matrix, row);
    int best = 0;
    for (int o = 1; o < kOptions; ++o)
      if (matrix.p(row, o) > matrix.p(row, best)) best = o;
    out.push_back({matrix.dest_block_of_row(row), matrix.source_task_of_row(row), best});
  }
  return out;
}

double long_range_sparsity(const std::vector<WiringChoice>& choices) {
  if (choices.empty()) return 0.0;
  const auto none = std::count_if(choices.begin(), choices.end(),
                                   [](const WiringChoice& c) { return !c.connects(); });
  return static_cast<double>(none) / static_cast<double>(choices.size());
}

}  // namespace tdmcl
