#include <fstream>
#include "json.hpp"

#include "tdmcl/runner.hpp"

namespace tdmcl {

using nlohmann::json;

std::string to_string(Phase p) {
  switch (p) {
    case Phase::kGrow: return "grow";
    case Phase::kEvolve: return "evolve";
    case Phase::kTrain: return "train";
    case Phase::kPrune: return "prune";
  }
  return "?";
}

Phase parse_phase(const std::string& text) {
  if (text == "grow") return Phase::kGrow;
  if (text == "evolve") return Phase::kEvolve;
  if (text == "train") return Phase::kTrain;
  if (text == "prune") return Phase::kPrune;
  throw IoError("unknown phase tag '" + text + "'");
}

std::string record_to_json(const PhaseRecord& r) {
  json j;
  j["index"] = r.index;
  j["phase"] = to_string(r.phase);
  j["task"] = r.task;
  json metrics = json::array();
  for (const auto& [t, v] : r.metrics) metrics.push_back({t, v});
  j["metrics"] = metrics;
  j["average"] = r.average ? json(*r.average) : json(nullptr);
  json blocks = json::array();
  for (const auto& b : r.blocks) blocks.push_back({b.task, b.block, b.total_weights, b.active_weights});
  j["census"] = {{"local_total", r.local_total},
                 {"local_active", r.local_active},
                 {"long_range_edges", r.long_range_edges},
                 {"long_range_params", r.long_range_params},
                 {"long_range_sparsity", r.long_range_sparsity},
                 {"blocks", blocks}};
  json digests = json::array();
  for (const auto& [t, d] : r.choice_digests) digests.push_back({t, d});
  j["choice_digests"] = digests;
  if (r.phase == Phase::kEvolve) {
    json wiring = json::array();
    for (const auto& w : r.wiring) wiring.push_back({w.dest_block, w.source_task, w.option});
    json rows = json::array();
    for (const auto& c : r.choices)
      rows.push_back({c.task, c.dest_block, c.source_task, c.option, c.p, c.h_n, c.h_l});
    j["evolution"] = {{"episode_losses", r.episode_losses}, {"wiring", wiring}, {"choices", rows}};
  }
  if (r.phase == Phase::kTrain)
    j["train"] = {{"loss", r.train_loss ? json(*r.train_loss) : json(nullptr)}, {"epochs", r.epochs}};
  if (r.phase == Phase::kPrune) {
    json rows = json::array();
    for (const auto& p : r.pruning)
      rows.push_back({p.round, p.task, p.block, p.active_before, p.active_after, p.mean_v, p.mean_h, p.e});
    j["pruning"] = rows;
  }
  return j.dump();
}

PhaseRecord record_from_json(const std::string& line) {
  PhaseRecord r;
  try {
    const json j = json::parse(line);
    r.index = j.at("index").get<int>();
    r.phase = parse_phase(j.at("phase").get<std::string>());
    r.task = j.at("task").get<int>();
    for (const auto& m : j.at("metrics")) r.metrics.emplace_back(m.at(0).get<int>(), m.at(1).get<double>());
    if (!j.at("average").is_null()) r.average = j.at("average").get<double>();
    const json& c = j.at("census");
    r.local_total = c.at("local_total").get<Index>();
    r.local_active = c.at("local_active").get<Index>();
    r.long_range_edges = c.at("long_range_edges").get<Index>();
    r.long_range_params = c.at("long_range_params").get<Index>();
    r.long_range_sparsity = c.at("long_range_sparsity").get<double>();
    for (const auto& b : c.at("blocks"))
      r.blocks.push_back(BlockCensus{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<Index>(),
                                     b.at(3).get<Index>()});
    for (const auto& d : j.at("choice_digests"))
      r.choice_digests.emplace_back(d.at(0).get<int>(), d.at(1).get<std::string>());
    if (j.contains("evolution")) {
      const json& e = j.at("evolution");
      r.episode_losses = e.at("episode_losses").get<std::vector<double>>();
      for (const auto& w : e.at("wiring"))
        r.wiring.push_back(WiringChoice{w.at(0).get<int>(), w.at(1).get<int>(), w.at(2).get<int>()});
      for (const auto& x : e.at("choices"))
        r.choices.push_back(ChoiceRow{x.at(0).get<int>(), x.at(1).get<int>(), x.at(2).get<int>(),
                                      x.at(3).get<int>(), x.at(4).get<double>(), x.at(5).get<int>(),
                                      x.at(6).get<double>()});
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      if (!t.at("loss").is_null()) r.train_loss = t.at("loss").get<double>();
      r.epochs = t.at("epochs").get<int>();
    }
    if (j.contains("pruning"))
      for (const auto& p : j.at("pruning"))
        r.pruning.push_back(PruneRow{p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>(),
                                     p.at(3).get<Index>(), p.at(4).get<Index>(), p.at(5).get<double>(),
                                     p.at(6).get<double>(), p.at(7).get<double>()});
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed ledger record: ") + e.what());
  }
  return r;
}

std::vector<PhaseRecord> read_ledger(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ledger '" + path + "'");
  std::vector<PhaseRecord> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const IoError& e) {
      throw IoError(path + " line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace tdmcl
