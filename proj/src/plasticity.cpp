#include "tdmcl/plasticity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace tdmcl {

std::string to_string(HebbianScope scope) {
  return scope == HebbianScope::kLayer ? "layer" : "network";
}

HebbianScope parse_hebbian_scope(const std::string& text) {
  if (text == "layer") return HebbianScope::kLayer;
  if (text == "network") return HebbianScope::kNetwork;
  throw ConfigError("unknown hebbian scope '" + text + "' (expected layer or network)");
}

double generality(const std::vector<const ChoiceMatrix*>& later, int task, int block) {
  if (block < 2 || block > 4) return 0.0;
  const int option = option_for_source_block(block);
  double e = 0.0;
  for (const ChoiceMatrix* m : later) {
    if (m == nullptr || m->task <= task) continue;
    double unused = 1.0;
    for (int dest = 2; dest <= 4; ++dest) unused *= 1.0 - m->p(m->row_index(dest, task), option);
    e += 1.0 - unused;
  }
  return e;
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

RankCorrelation spearman(const std::vector<double>& x, const std::vector<double>& y) {
  RankCorrelation out;
  out.n = std::min(x.size(), y.size());
  if (out.n < 3) return out;
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / out.n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / out.n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < out.n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return out;
  out.rho = sxy / std::sqrt(sxx * syy);
  const double dof = static_cast<double>(out.n) - 2.0;
  const double r = std::clamp(out.rho, -1.0 + 1e-15, 1.0 - 1e-15);
  const double t = r * std::sqrt(dof / (1.0 - r * r));
  const boost::math::students_t dist(dof);
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return out;
}

RankCorrelation correlate_plasticity_pruning(const std::vector<KernelStat>& table) {
  std::vector<double> h, pruned;
  for (const auto& k : table) {
    h.push_back(k.mean_h);
    pruned.push_back(k.pruned_fraction);
  }
  return spearman(h, pruned);
}

}  // namespace tdmcl
