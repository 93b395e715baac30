#include <filesystem>
#include <sstream>

#include "tdmcl/binary_io.hpp"
#include "tdmcl/runner.hpp"

namespace tdmcl {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string optional_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

}  // namespace

void write_reports(const std::string& out_dir, const std::vector<PhaseRecord>& ledger,
                   const std::vector<KernelStat>* kernels) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  std::ostringstream summary, full, pruning, choices, kern;

  // grow and the train phase that follows it share one row.
  summary << "phase_index,phase,task,learned_tasks,average_metric,total_active_params,"
             "local_active_params,long_range_params,long_range_edges,long_range_sparsity\n";
  full << "index,phase,task,learned_tasks,average_metric,metrics,local_total,local_active,"
          "long_range_edges,long_range_params,long_range_sparsity,choice_digests\n";
  pruning << "round,task,block,active_before,active_after,mean_V,mean_H,E\n";
  choices << "task,dest_block,source_task,option,p,h_n,h_l\n";
  kern << "task,block,layer,out_channel,in_channel,mean_H,pruned_fraction\n";

  for (const PhaseRecord& r : ledger) {
    std::string metrics, digests;
    for (const auto& [t, v] : r.metrics) metrics += (metrics.empty() ? "" : ";") + std::to_string(t) + ":" + num(v);
    for (const auto& [t, d] : r.choice_digests) digests += (digests.empty() ? "" : ";") + std::to_string(t) + ":" + d;
    full << r.index << ',' << to_string(r.phase) << ',' << r.task << ',' << r.metrics.size() << ','
         << optional_num(r.average) << ',' << metrics << ',' << r.local_total << ',' << r.local_active
         << ',' << r.long_range_edges << ',' << r.long_range_params << ','
         << num(r.long_range_sparsity) << ',' << digests << '\n';
    if (r.phase != Phase::kGrow) {
      const std::string tag = r.phase == Phase::kTrain ? "grow+train" : to_string(r.phase);
      summary << r.index << ',' << tag << ',' << r.task << ',' << r.metrics.size() << ','
              << optional_num(r.average) << ',' << r.local_active + r.long_range_params << ','
              << r.local_active << ',' << r.long_range_params << ',' << r.long_range_edges << ','
              << num(r.long_range_sparsity) << '\n';
    }
    for (const PruneRow& p : r.pruning)
      pruning << p.round << ',' << p.task << ',' << p.block << ',' << p.active_before << ','
              << p.active_after << ',' << num(p.mean_v) << ',' << num(p.mean_h) << ',' << num(p.e)
              << '\n';
    for (const ChoiceRow& c : r.choices)
      choices << c.task << ',' << c.dest_block << ',' << c.source_task << ',' << c.option + 1 << ','
              << num(c.p) << ',' << c.h_n << ',' << num(c.h_l) << '\n';
  }
  if (kernels)
    for (const KernelStat& k : *kernels)
      kern << k.task << ',' << k.block << ',' << k.layer << ',' << k.out_channel << ','
           << k.in_channel << ',' << num(k.mean_h) << ',' << num(k.pruned_fraction) << '\n';

  write_file_atomic((dir / "summary.csv").string(), summary.str());
  write_file_atomic((dir / "ledger.csv").string(), full.str());
  write_file_atomic((dir / "pruning.csv").string(), pruning.str());
  write_file_atomic((dir / "choices.csv").string(), choices.str());
  if (kernels || !fs::exists(dir / "kernels.csv"))
    write_file_atomic((dir / "kernels.csv").string(), kern.str());
}

}  // namespace tdmcl
