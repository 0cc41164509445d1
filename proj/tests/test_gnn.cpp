#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "bms/gnn.hpp"
#include "bms/graphbuild.hpp"
#include "bms/ingest.hpp"

using namespace bms;

namespace {

// plain dense helpers, independent of the tape
Tensor mm(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t p = 0; p < a.cols(); ++p)
      for (std::size_t j = 0; j < b.cols(); ++j)
        c.at(i, j) += a.at(i, p) * b.at(p, j);
  return c;
}

Tensor add_bias(Tensor x, const Tensor& b) {
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) x.at(i, j) += b.at(0, j);
  return x;
}

Tensor relu_t(Tensor x) {
  for (double& v : x.data) v = v > 0 ? v : 0.0;
  return x;
}

// straight-line reference forward pass mirroring the published layer rule
Tensor reference_forward(const ModelParams& params, const GnnConfig& cfg,
                         const Tensor& emb, const std::vector<Tensor>& mats) {
  Tensor h = add_bias(mm(emb, params.value("proj.W")), params.value("proj.b"));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    std::string pre = "l" + std::to_string(l) + ".";
    Tensor out = mm(h, params.value(pre + "W0"));
    Tensor neigh({h.rows(), cfg.hidden});
    for (std::size_t r = 0; r < cfg.relations; ++r) {
      Tensor msg = mm(mats[r], mm(h, params.value(pre + "W" + std::to_string(r + 1))));
      for (std::size_t i = 0; i < msg.size(); ++i) neigh.data[i] += msg.data[i];
    }
    if (cfg.gated) {
      Tensor gate = mm(h, params.value(pre + "gate.W"));
      for (double& v : gate.data) v = 1.0 / (1.0 + std::exp(-v));
      for (std::size_t i = 0; i < neigh.size(); ++i)
        neigh.data[i] *= gate.data[i];
    }
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += neigh.data[i];
    h = relu_t(add_bias(std::move(out), params.value(pre + "b")));
  }
  return h;
}

AttributeSpace five_node_space() {
  AttributeSpace space({"f"});
  for (int i = 0; i < 5; ++i) space.intern(0, "tok" + std::to_string(i));
  return space;
}

HeteroGraph five_node_graph() {
  HeteroGraph g;
  for (NodeId i = 0; i < 5; ++i) g.ensure_node(i, 0);
  g.add_edge(0, 1, 0, 2);
  g.add_edge(1, 2, 0);
  g.add_edge(2, 3, 1, 3);
  g.add_edge(3, 4, 1);
  g.add_edge(0, 4, 0);
  return g;
}

}  // namespace

TEST_CASE("hashed embeddings are deterministic per (space, seed)") {
  AttributeSpace s1 = five_node_space();
  AttributeSpace s2 = five_node_space();
  Tensor a = hashed_embeddings(s1, 32, 9);
  Tensor b = hashed_embeddings(s2, 32, 9);
  Tensor c = hashed_embeddings(s1, 32, 10);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
  CHECK(a.shape == std::vector<std::size_t>{5, 32});
  // token identity, not id order, decides the vector
  AttributeSpace s3({"f"});
  s3.intern(0, "tok1");
  Tensor d = hashed_embeddings(s3, 32, 9);
  for (std::size_t j = 0; j < 32; ++j) CHECK(d.at(0, j) == a.at(1, j));
}

TEST_CASE("hashed embeddings are near-orthogonal at d0 = 768") {
  AttributeSpace space({"f"});
  for (int i = 0; i < 150; ++i) space.intern(0, "t" + std::to_string(i));
  Tensor e = hashed_embeddings(space, 768, 1);
  DetRng rng(5);
  double worst = 0.0;
  for (int pair = 0; pair < 1000; ++pair) {
    std::size_t i = rng.next_below(150), j = rng.next_below(150);
    if (i == j) continue;
    double dot = 0, ni = 0, nj = 0;
    for (std::size_t d = 0; d < 768; ++d) {
      dot += e.at(i, d) * e.at(j, d);
      ni += e.at(i, d) * e.at(i, d);
      nj += e.at(j, d) * e.at(j, d);
    }
    worst = std::max(worst, std::abs(dot) / std::sqrt(ni * nj));
  }
  CHECK(worst < 0.2);
}

TEST_CASE("relation matrices: symmetry, weights and mean normalization") {
  HeteroGraph g = five_node_graph();
  auto raw = relation_matrices(g, 5, 2, false);
  REQUIRE(raw.size() == 2);
  CHECK(raw[0].at(0, 1) == 2.0);
  CHECK(raw[0].at(1, 0) == 2.0);
  CHECK(raw[1].at(2, 3) == 3.0);
  CHECK(raw[0].at(2, 3) == 0.0);  // type-1 edge absent from relation 0

  auto norm = relation_matrices(g, 5, 2, true);
  for (const auto& m : norm)
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 5; ++j) s += m.at(i, j);
      CHECK((s == doctest::Approx(1.0) || s == doctest::Approx(0.0)));
    }
  // edge type beyond the declared relation count is an error
  CHECK_THROWS_AS(relation_matrices(g, 5, 1, false), Error);
}

TEST_CASE("pooling matrix averages each subgraph's nodes") {
  BehaviorSubgraph a;
  a.record_id = "a";
  a.nodes = {0, 2, 4};
  BehaviorSubgraph b;
  b.record_id = "b";
  b.nodes = {1};
  Tensor P = pooling_matrix({&a, &b}, 5);
  CHECK(P.at(0, 0) == doctest::Approx(1.0 / 3));
  CHECK(P.at(0, 2) == doctest::Approx(1.0 / 3));
  CHECK(P.at(0, 1) == 0.0);
  CHECK(P.at(1, 1) == 1.0);

  BehaviorSubgraph empty;
  empty.record_id = "e";
  try {
    pooling_matrix({&empty}, 5);
    FAIL("expected EmptyBehavior");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyBehavior);
  }
}

TEST_CASE("rgcn forward matches an independent dense implementation") {
  for (bool gated : {false, true}) {
    AttributeSpace space = five_node_space();
    HeteroGraph g = five_node_graph();
    GnnConfig cfg;
    cfg.d0 = 8;
    cfg.hidden = 6;
    cfg.layers = 2;
    cfg.relations = 2;
    cfg.gated = gated;
    cfg.seed = 3;
    Tensor emb = hashed_embeddings(space, cfg.d0, 3);
    auto mats = relation_matrices(g, 5, 2, cfg.mean_norm);
    ModelParams params = init_rgcn_params(cfg);

    Tape tape;
    std::vector<Tape::Ref> mat_refs;
    for (const auto& m : mats) mat_refs.push_back(tape.constant(m));
    Tape::Ref h = rgcn_forward(tape, params, cfg, tape.constant(emb), mat_refs);
    Tensor want = reference_forward(params, cfg, emb, mats);
    const Tensor& got = tape.value(h);
    REQUIRE(got.shape == want.shape);
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("rgcn is equivariant under node relabeling") {
  AttributeSpace space = five_node_space();
  HeteroGraph g = five_node_graph();
  GnnConfig cfg;
  cfg.d0 = 8;
  cfg.hidden = 6;
  cfg.layers = 2;
  cfg.relations = 2;
  Tensor emb = hashed_embeddings(space, cfg.d0, 1);
  auto mats = relation_matrices(g, 5, 2, true);
  ModelParams params = init_rgcn_params(cfg);

  std::vector<std::size_t> perm = {3, 0, 4, 1, 2};  // new id of old node i
  Tensor emb_p({5, cfg.d0});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < cfg.d0; ++j)
      emb_p.at(perm[i], j) = emb.at(i, j);
  std::vector<Tensor> mats_p(2, Tensor({5, 5}));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        mats_p[r].at(perm[i], perm[j]) = mats[r].at(i, j);

  Tensor base = reference_forward(params, cfg, emb, mats);
  Tape tape;
  std::vector<Tape::Ref> refs;
  for (const auto& m : mats_p) refs.push_back(tape.constant(m));
  const Tensor& permuted =
      tape.value(rgcn_forward(tape, params, cfg, tape.constant(emb_p), refs));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < cfg.hidden; ++j)
      CHECK(permuted.at(perm[i], j) == doctest::Approx(base.at(i, j)));
}

TEST_CASE("stratified split: proportions, coverage, determinism") {
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) y.push_back(0);
  for (int i = 0; i < 50; ++i) y.push_back(1);
  SplitIndices s = stratified_split(y, 7);
  CHECK(s.train.size() == 120);  // 80 + 40
  CHECK(s.val.size() == 15);     // 10 + 5
  CHECK(s.test.size() == 15);
  std::set<std::size_t> all;
  all.insert(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == y.size());  // disjoint cover
  // per-class proportions hold inside each part
  auto count1 = [&](const std::vector<std::size_t>& idx) {
    std::size_t c = 0;
    for (auto i : idx) c += y[i] == 1;
    return c;
  };
  CHECK(count1(s.train) == 40);
  CHECK(count1(s.val) == 5);
  CHECK(count1(s.test) == 5);

  SplitIndices again = stratified_split(y, 7);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  SplitIndices other = stratified_split(y, 8);
  CHECK(other.train != s.train);
}

TEST_CASE("detect training starts near ln(classes) and reduces the loss") {
  // tiny planted two-class task: label = token parity of field "m"
  AttributeSpace space({"m", "x"});
  MetaRule rule = MetaRule::clique_over({"m", "x"});
  std::vector<BehaviorSubgraph> sgs;
  std::vector<std::string> labels;
  DetRng rng(2);
  for (int i = 0; i < 60; ++i) {
    int m = int(rng.next_below(6));
    BehaviorRecord rec;
    rec.record_id = "r" + std::to_string(i);
    rec.values = {{"m", "m" + std::to_string(m)},
                  {"x", "x" + std::to_string(rng.next_below(3))}};
    sgs.push_back(build_subgraph(rec, rule, space));
    labels.push_back(m % 2 ? "odd" : "even");
  }
  GnnConfig cfg;
  cfg.d0 = 16;
  cfg.hidden = 16;
  cfg.head_h1 = 16;
  cfg.head_h2 = 8;
  cfg.epochs = 120;
  cfg.lr = 5e-3;
  cfg.seed = 1;
  DetectTrainResult r = train_detect(space, sgs, labels, cfg);
  REQUIRE(r.loss_curve.size() == cfg.epochs);
  CHECK(r.loss_curve.front() == doctest::Approx(std::log(2.0)).epsilon(0.5));
  CHECK(r.loss_curve.back() < 0.5 * r.loss_curve.front());
  CHECK(r.label_vocab == std::vector<std::string>{"even", "odd"});
  CHECK(r.test_indices.size() == r.test_truth.size());
  CHECK(r.test_truth.size() == r.test_pred.size());
  CHECK(r.initial_embeddings.rows() == space.size());
  CHECK(r.final_node_states.cols() == cfg.hidden);
  CHECK(r.params.has("emb"));  // trainable table saved with the model

  // single-class label vector is rejected
  std::vector<std::string> flat(labels.size(), "only");
  CHECK_THROWS_AS(train_detect(space, sgs, flat, cfg), Error);
}

TEST_CASE("custom-split training returns probabilities over the test rows") {
  AttributeSpace space({"a", "b"});
  MetaRule rule = MetaRule::clique_over({"a", "b"});
  std::vector<BehaviorSubgraph> sgs;
  std::vector<int> y;
  DetRng rng(4);
  for (int i = 0; i < 40; ++i) {
    int cls = i % 2;
    BehaviorRecord rec;
    rec.record_id = "r" + std::to_string(i);
    rec.values = {{"a", cls ? "hot" : "cold"},
                  {"b", "n" + std::to_string(rng.next_below(4))}};
    sgs.push_back(build_subgraph(rec, rule, space));
    y.push_back(cls);
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < 32; ++i) train_idx.push_back(i);
  for (std::size_t i = 32; i < 40; ++i) test_idx.push_back(i);
  GnnConfig cfg;
  cfg.d0 = 16;
  cfg.hidden = 16;
  cfg.head_h1 = 16;
  cfg.head_h2 = 8;
  cfg.epochs = 150;
  cfg.lr = 5e-3;
  SplitTrainResult r = train_eval_split(space, sgs, y, train_idx, test_idx, cfg);
  REQUIRE(r.test_scores.size() == 8);
  for (double s : r.test_scores) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  // the planted signal is trivially separable
  std::size_t correct = 0;
  for (std::size_t i = 0; i < 8; ++i) correct += r.test_pred[i] == y[32 + i];
  CHECK(correct >= 7);

  std::vector<int> flat(y.size(), 0);
  CHECK_THROWS_AS(
      train_eval_split(space, sgs, flat, train_idx, test_idx, cfg), Error);
}

TEST_CASE("node classification learns planted per-node classes") {
  AttributeSpace space({"f"});
  for (int i = 0; i < 12; ++i) space.intern(0, "n" + std::to_string(i));
  HeteroGraph g;
  for (NodeId i = 0; i < 12; ++i) g.ensure_node(i, 0);
  // two clusters wired internally
  for (NodeId i = 0; i < 6; ++i)
    for (NodeId j = i + 1; j < 6; ++j) g.add_edge(i, j, 0);
  for (NodeId i = 6; i < 12; ++i)
    for (NodeId j = i + 1; j < 12; ++j) g.add_edge(i, j, 0);
  std::map<NodeId, int> labels;
  for (NodeId i = 0; i < 12; ++i) labels[i] = i < 6 ? 0 : 1;
  GnnConfig cfg;
  cfg.d0 = 16;
  cfg.hidden = 16;
  cfg.head_h1 = 16;
  cfg.head_h2 = 8;
  cfg.epochs = 150;
  cfg.lr = 5e-3;
  NodeClassResult r = train_nodeclass(space, g, labels, cfg);
  CHECK(r.train_accuracy == doctest::Approx(1.0));
  CHECK(r.node_states.rows() == 12);
  CHECK_THROWS_AS(train_nodeclass(space, g, {}, cfg), Error);
}
