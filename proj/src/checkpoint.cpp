#include <cmath>

#include "tdmcl/binary_io.hpp"
#include "tdmcl/runner.hpp"

namespace tdmcl {

namespace {

constexpr std::string_view kCheckpointMagic = "TDMCL1";

void put_matrix(ByteWriter& w, const ChoiceMatrix& m) {
  w.u32(m.task);
  w.u32(m.episodes);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  for (int r = 0; r < m.rows(); ++r)
    for (int o = 0; o < kOptions; ++o) w.f64(m.p(r, o));
  for (const RowHistory& h : m.history) {
    w.u32(static_cast<std::uint32_t>(h.losses.size()));
    for (double l : h.losses) w.f64(l);
    for (const OptionHistory& o : h.options) {
      w.u32(o.count);
      w.u32(static_cast<std::uint32_t>(o.losses.size()));
      for (double l : o.losses) w.f64(l);
    }
  }
  w.u32(static_cast<std::uint32_t>(m.task_losses.size()));
  for (double l : m.task_losses) w.f64(l);
}

std::vector<double> get_losses(ByteReader& r) {
  const auto n = r.u32();
  if (n > r.remaining() / 8) r.fail("loss list exceeds file size");
  std::vector<double> v(n);
  for (auto& x : v) x = r.f64();
  return v;
}

ChoiceMatrix get_matrix(ByteReader& r) {
  const int task = static_cast<int>(r.u32());
  if (task < 2 || task > 1024) r.fail("invalid choice-matrix task");
  ChoiceMatrix m = init_choice_matrix(task);
  m.episodes = static_cast<int>(r.u32());
  if (static_cast<int>(r.u32()) != m.rows()) r.fail("choice-matrix row count mismatch");
  for (int row = 0; row < m.rows(); ++row)
    for (int o = 0; o < kOptions; ++o) m.p(row, o) = r.f64();
  for (RowHistory& h : m.history) {
    h.losses = get_losses(r);
    for (OptionHistory& o : h.options) {
      o.count = static_cast<int>(r.u32());
      o.losses = get_losses(r);
    }
  }
  m.task_losses = get_losses(r);
  for (int row = 0; row < m.rows(); ++row) {
    try {
      validate_row(m, row);
    } catch (const ControllerStateError& e) {
      r.fail(e.what());
    }
  }
  return m;
}

}  // namespace

std::string encode_checkpoint(const RunState& s) {
  ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.str(echo_config(s.config));
  w.u64(s.next_phase);
  w.u32(s.prune_rounds);
  w.str(s.master.serialize());
  w.u64(s.ledger_records);
  w.u64(s.ledger_bytes);
  encode_graph(w, s.graph);
  w.u32(static_cast<std::uint32_t>(s.choices.size()));
  for (const auto& [task, m] : s.choices) put_matrix(w, m);
  seal(w);
  return std::move(w.data());
}

RunState decode_checkpoint(std::string_view bytes, const std::string& what) {
  ByteReader r(unseal(bytes, kCheckpointMagic, what), what);
  RunState s;
  try {
    s.config = parse_config(r.str(), {}, what + " (embedded config)");
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  s.next_phase = r.u64();
  s.prune_rounds = static_cast<int>(r.u32());
  s.master.deserialize(r.str());
  s.ledger_records = r.u64();
  s.ledger_bytes = r.u64();
  s.graph = decode_graph(r);
  const auto n = r.u32();
  if (n > 1024) r.fail("implausible choice-matrix count");
  for (std::uint32_t i = 0; i < n; ++i) {
    ChoiceMatrix m = get_matrix(r);
    if (m.task > s.graph.tasks()) r.fail("choice matrix for a missing column");
    s.choices.emplace(m.task, std::move(m));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after checkpoint payload");
  if (s.next_phase > phase_schedule(s.config).size()) r.fail("phase index beyond the schedule");
  return s;
}

void write_checkpoint(const std::string& path, const RunState& s) {
  write_file_atomic(path, encode_checkpoint(s));
}

RunState read_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path), path);
}

double finalized_sparsity(const std::map<int, ChoiceMatrix>& choices) {
  int rows = 0, none = 0;
  for (const auto& [task, m] : choices) {
    for (const WiringChoice& c : finalize_wiring(m)) {
      ++rows;
      none += c.connects() ? 0 : 1;
    }
  }
  return rows == 0 ? 1.0 : static_cast<double>(none) / rows;
}

}  // namespace tdmcl
