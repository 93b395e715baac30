#include "doctest.h"
#include "tdmcl/binary_io.hpp"
#include "tdmcl/tasks.hpp"
#include "tdmcl/topology.hpp"

namespace tdmcl {
namespace {

struct Toy {
  ColumnGraph graph;
  std::vector<Dataset> suite;
  Rng rng{21};

  explicit Toy(int tasks) {
    SuiteConfig c;
    c.seed = 2;
    c.train_size = 16;
    c.val_size = 4;
    c.test_size = 12;
    const auto specs = default_specs(1.0);
    for (int t = 0; t < tasks; ++t) {
      suite.push_back(generate_task(specs[t], c));
      grow_task_column(graph, specs[t], rng);
    }
  }
};

std::string column_bytes(const ColumnGraph& g, int task) {
  ColumnGraph only;
  only.config = g.config;
  only.columns.push_back(g.column(task));
  only.columns.back().spec.task_id = 1;
  ByteWriter w;
  encode_graph(w, only);
  return w.data();
}

TEST_CASE("ladder widths") {
  CHECK(ladder_widths(1.0) == std::array<int, 4>{32, 64, 128, 256});
  CHECK(ladder_widths(0.25) == std::array<int, 4>{8, 16, 32, 64});
  CHECK(ladder_widths(0.1) == std::array<int, 4>{4, 7, 13, 26});
  CHECK_THROWS_AS(ladder_widths(0.0), ConfigError);
}

TEST_CASE("grow_task_column") {
  ColumnGraph g;
  Rng rng(1);
  const auto specs = default_specs(1.0);
  grow_task_column(g, specs[0], rng);
  CHECK(g.tasks() == 1);
  CHECK(g.edges.empty());
  const auto& blocks = g.column(1).blocks;
  const int widths[] = {8, 16, 32, 64};
  const int sizes[] = {8, 4, 2, 1};
  for (int b = 0; b < 4; ++b) {
    CHECK(blocks[b].output.channels == widths[b]);
    CHECK(blocks[b].output.height == sizes[b]);
    CHECK(blocks[b].name() == "B" + std::to_string(b + 1) + "^1");
  }
  CHECK(blocks[0].input.channels == 3);
  CHECK(g.column(1).head.weights.rows() == 5);

  CHECK_THROWS_AS(grow_task_column(g, specs[0], rng), GrowthError);
  CHECK_THROWS_AS(grow_task_column(g, specs[2], rng), GrowthError);

  ColumnGraph wide;
  wide.config.width_factor = 1.0;
  grow_task_column(wide, specs[0], rng);
  CHECK(wide.column(1).blocks[3].output.channels == 256);
}

TEST_CASE("growth leaves earlier columns untouched") {
  Toy toy(1);
  const std::string before = column_bytes(toy.graph, 1);
  const MatrixF out_before = predict(toy.graph, 1, toy.suite[0].test);
  grow_task_column(toy.graph, default_specs(1.0)[1], toy.rng);
  wire_edges(toy.graph, 2, {{2, 1, option_for_source_block(3)}}, toy.rng);
  CHECK(column_bytes(toy.graph, 1) == before);
  CHECK(predict(toy.graph, 1, toy.suite[0].test) == out_before);
}

TEST_CASE("wire_edges") {
  Toy toy(3);
  wire_edges(toy.graph, 3, {{2, 1, 0}, {3, 2, 1}, {4, 1, 2}}, toy.rng);
  CHECK(toy.graph.edges.empty());

  wire_edges(toy.graph, 2, {{2, 1, option_for_source_block(3)}}, toy.rng);
  REQUIRE(toy.graph.edges.size() == 1);
  const LongRangeEdge& e = toy.graph.edges[0];
  CHECK(e.source_task == 1);
  CHECK(e.source_block == 3);
  CHECK(e.dest_task == 2);
  CHECK(e.dest_block == 2);
  CHECK(e.name() == "B3^1->B2^2");
  CHECK(e.adapter.geometry().out_channels == toy.graph.column(2).blocks[1].input.channels);

  CHECK_THROWS_AS(wire_edges(toy.graph, 2, {{2, 2, 3}}, toy.rng), WiringError);
  CHECK_THROWS_AS(wire_edges(toy.graph, 2, {{2, 3, 3}}, toy.rng), WiringError);

  // Two earlier tasks into the same destination block: both edges exist and
  // the merged input keeps the native shape.
  wire_edges(toy.graph, 3, {{3, 1, option_for_source_block(2)}, {3, 2, option_for_source_block(4)}},
             toy.rng);
  CHECK(toy.graph.incoming(3).size() == 2);
  const MatrixF out = predict(toy.graph, 3, toy.suite[2].test);
  CHECK(out.rows() == toy.graph.column(3).spec.head_outputs());
  CHECK(out.cols() == toy.suite[2].test.size());
  CHECK(toy.graph.ancestors(3) == std::vector<int>{1, 2, 3});
}

TEST_CASE("merge_inputs") {
  const MatrixF native = MatrixF::Random(4, 6);
  CHECK(merge_inputs(native, {}) == native);
  CHECK(merge_inputs(native, {MatrixF::Zero(4, 6)}) == native);
  CHECK(merge_inputs(native, {native}).isApprox(2 * native));
  CHECK_THROWS_AS(merge_inputs(native, {MatrixF::Zero(4, 5)}), WiringError);
}

TEST_CASE("acyclicity is checked") {
  Toy toy(2);
  wire_edges(toy.graph, 2, {{2, 1, 3}}, toy.rng);
  CHECK_NOTHROW(check_acyclic(toy.graph));
  LongRangeEdge back = toy.graph.edges[0];
  std::swap(back.source_task, back.dest_task);
  toy.graph.edges.push_back(back);
  CHECK_THROWS_AS(check_acyclic(toy.graph), WiringError);
}

TEST_CASE("parameter census") {
  Toy toy(2);
  Census c = parameter_census(toy.graph);
  CHECK(c.blocks.size() == 8);
  for (const auto& b : c.blocks) CHECK(b.sparsity() == 0.0);
  CHECK(c.local_active == c.local_total);

  auto& p = toy.graph.column(2).blocks[2].conv1.params();
  const Index half = p.mask.size() / 2;
  for (Index i = 0; i < half; ++i) p.mask(i) = 0.0f;
  p.apply_mask();
  const Census after = parameter_census(toy.graph);
  CHECK(after.local_active == c.local_active - half);
  CHECK(after.blocks[6].active_weights == c.blocks[6].active_weights - half);
  CHECK(after.blocks[6].sparsity() > 0.0);

  wire_edges(toy.graph, 2, {{2, 1, 3}}, toy.rng);
  const Census wired = parameter_census(toy.graph);
  CHECK(wired.long_range_edges == 1);
  CHECK(wired.long_range_params == toy.graph.edges[0].adapter.params().total_count());
}

TEST_CASE("forward is deterministic; zero head gives zero output") {
  Toy toy(1);
  const MatrixF a = predict(toy.graph, 1, toy.suite[0].test);
  CHECK(predict(toy.graph, 1, toy.suite[0].test) == a);
  // Batch size only changes the GEMM blocking.
  CHECK(predict(toy.graph, 1, toy.suite[0].test, 5).isApprox(a, 1e-5f));
  toy.graph.column(1).head.weights.setZero();
  CHECK(predict(toy.graph, 1, toy.suite[0].test).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("fully masked trainable set: weights unchanged, loss returned") {
  Toy toy(1);
  TaskColumn& col = toy.graph.column(1);
  for (auto& b : col.blocks)
    for (auto* l : b.layers()) {
      l->params().mask.setZero();
      l->params().apply_mask();
    }
  col.head.mask.setZero();
  col.head.apply_mask();
  const std::string before = column_bytes(toy.graph, 1);
  ColumnTrainer trainer(toy.graph, 1, {}, SgdConfig{0.1, 0.9}, 5.0);
  const Split& s = toy.suite[0].train;
  const double loss = trainer.step(s.inputs, s.states, {}, s.labels, s.targets);
  CHECK(std::isfinite(loss));
  const ColumnGraph& g = toy.graph;
  for (const auto& b : g.column(1).blocks)
    for (const auto* l : b.layers()) CHECK(l->params().weights.cwiseAbs().maxCoeff() == 0.0f);
  CHECK(g.column(1).head.weights.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("source cache reproduces on-the-fly source spikes") {
  Toy toy(2);
  SourceCache cache;
  cache.build(toy.graph, {1}, toy.suite[1].train);
  CHECK(cache.has(1, 3));
  CHECK_FALSE(cache.has(1, 1));
  std::vector<Index> samples = {3, 0, 7};
  MatrixF images(toy.suite[1].train.inputs.rows(), 3);
  for (int i = 0; i < 3; ++i) images.col(i) = toy.suite[1].train.inputs.col(samples[i]);
  const ColumnOutput direct = column_forward(toy.graph, 1, images, MatrixF(0, 3), {}, {},
                                             SpikeMode::kHard, false);
  for (int b = 2; b <= 4; ++b)
    CHECK(cache.gather(1, b, samples, toy.graph.config.steps) == direct.spikes[b - 1]);
}

TEST_CASE("training with a long-range edge uses cached sources and moves the adapter") {
  Toy toy(2);
  wire_edges(toy.graph, 2, {{3, 1, option_for_source_block(2)}}, toy.rng);
  auto incoming = toy.graph.incoming(2);
  SourceCache cache;
  cache.build(toy.graph, {1}, toy.suite[1].train);
  const MatrixF adapter_before = incoming[0]->adapter.params().weights;
  const std::string col1 = column_bytes(toy.graph, 1);
  std::vector<Index> all(static_cast<std::size_t>(toy.suite[1].train.size()));
  for (Index i = 0; i < static_cast<Index>(all.size()); ++i) all[i] = i;
  const MatrixF src = cache.gather(1, 2, all, toy.graph.config.steps);
  ColumnTrainer trainer(toy.graph, 2, incoming, SgdConfig{0.1, 0.9}, 5.0);
  const Split& s = toy.suite[1].train;
  trainer.step(s.inputs, s.states, {{{1, 2}, &src}}, s.labels, s.targets);
  CHECK(incoming[0]->adapter.params().weights != adapter_before);
  CHECK(column_bytes(toy.graph, 1) == col1);
}

TEST_CASE("adapter learning-rate scale of zero freezes adapters only") {
  Toy toy(2);
  wire_edges(toy.graph, 2, {{3, 1, option_for_source_block(2)}}, toy.rng);
  auto incoming = toy.graph.incoming(2);
  SourceCache cache;
  cache.build(toy.graph, {1}, toy.suite[1].train);
  const MatrixF adapter_before = incoming[0]->adapter.params().weights;
  const MatrixF head_before = toy.graph.column(2).head.weights;
  std::vector<Index> all(static_cast<std::size_t>(toy.suite[1].train.size()));
  for (Index i = 0; i < static_cast<Index>(all.size()); ++i) all[i] = i;
  const MatrixF src = cache.gather(1, 2, all, toy.graph.config.steps);
  ColumnTrainer trainer(toy.graph, 2, incoming, SgdConfig{0.1, 0.9}, 5.0, 0.0);
  const Split& s = toy.suite[1].train;
  trainer.step(s.inputs, s.states, {{{1, 2}, &src}}, s.labels, s.targets);
  CHECK(incoming[0]->adapter.params().weights == adapter_before);
  CHECK(toy.graph.column(2).head.weights != head_before);
}

TEST_CASE("graph serialization round-trip") {
  Toy toy(3);
  wire_edges(toy.graph, 2, {{2, 1, 4}}, toy.rng);
  wire_edges(toy.graph, 3, {{4, 2, 5}, {3, 1, 3}}, toy.rng);
  auto& p = toy.graph.column(1).blocks[0].conv2.params();
  p.mask(0, 0) = 0.0f;
  p.apply_mask();
  toy.graph.column(2).blocks[1].training_runs = 2;
  ByteWriter w;
  encode_graph(w, toy.graph);
  ByteReader r(w.data(), "mem");
  ColumnGraph back = decode_graph(r);
  CHECK(r.remaining() == 0);
  ByteWriter w2;
  encode_graph(w2, back);
  CHECK(w2.data() == w.data());
  for (int t = 1; t <= 3; ++t)
    CHECK(predict(back, t, toy.suite[t - 1].test) == predict(toy.graph, t, toy.suite[t - 1].test));

  ByteReader truncated(std::string_view(w.data()).substr(0, w.size() - 9), "mem");
  CHECK_THROWS_AS(decode_graph(truncated), CorruptFileError);
}

}  // namespace
}  // namespace tdmcl
