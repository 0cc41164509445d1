#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <set>

#include "bms/generate.hpp"
#include "oracles.hpp"

using namespace bms;

namespace {

void zero_params(ModelParams& p, const std::string& prefix = "") {
  for (auto& [name, t] : p.values())
    if (prefix.empty() || name.rfind(prefix, 0) == 0)
      std::fill(t.data.begin(), t.data.end(), 0.0);
}

// brute-force best injective node->slot assignment score
double best_assignment_score(const std::vector<std::vector<double>>& sim,
                             std::size_t k) {
  std::size_t n = sim.size();
  double best = -1e18;
  std::vector<int> slot_of(n, -1);
  std::vector<bool> used(k, false);
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double acc) {
    if (i == n) {
      best = std::max(best, acc);
      return;
    }
    for (std::size_t r = 0; r < k; ++r) {
      if (used[r]) continue;
      used[r] = true;
      rec(i + 1, acc + sim[i][r]);
      used[r] = false;
    }
  };
  rec(0, 0.0);
  return best;
}

struct FraudFixture {
  AttributeSpace space{std::vector<std::string>{"type", "amount"}};
  MetaRule rule = MetaRule::clique_over({"type", "amount"});
  std::vector<BehaviorSubgraph> subgraphs;
  std::vector<int> y;
  std::vector<double> amounts;
  AttrVocab vocab;

  explicit FraudFixture(int n, std::uint64_t seed) {
    DetRng rng(seed);
    for (int i = 0; i < n; ++i) {
      bool fraud = rng.uniform() < 0.35;
      BehaviorRecord rec;
      rec.record_id = "r" + std::to_string(i);
      rec.values["type"] = fraud ? "transfer" : "payment";
      rec.values["amount"] =
          fraud ? "e5" : "e" + std::to_string(rng.next_below(3));
      subgraphs.push_back(build_subgraph(rec, rule, space));
      y.push_back(fraud ? 1 : 0);
      amounts.push_back(fraud ? 1e5 + double(i) : 100.0);
    }
    for (std::size_t i = 0; i < subgraphs.size(); ++i)
      if (y[i] == 1)
        vae_graph_from_subgraph(subgraphs[i], space, rule, vocab);
  }
};

}  // namespace

TEST_CASE("triangular index maps are bijective") {
  for (std::size_t k : {std::size_t(2), std::size_t(3), std::size_t(11)}) {
    std::set<std::size_t> seen;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a; b < k; ++b) {
        std::size_t idx = tri_index(k, a, b);
        CHECK(idx < k * (k + 1) / 2);
        CHECK(seen.insert(idx).second);
        CHECK(tri_index(k, b, a) == idx);  // symmetric
      }
    CHECK(seen.size() == k * (k + 1) / 2);

    std::set<std::size_t> off;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) {
        std::size_t idx = off_tri_index(k, a, b);
        CHECK(idx < k * (k - 1) / 2);
        CHECK(off.insert(idx).second);
      }
    CHECK(off.size() == k * (k - 1) / 2);
  }
}

TEST_CASE("vae graph round-trips through the subgraph representation") {
  AttributeSpace space({"a", "b", "c"});
  MetaRule rule = MetaRule::clique_over({"a", "b", "c"});
  BehaviorRecord rec;
  rec.record_id = "r";
  rec.values = {{"a", "x"}, {"b", "y"}, {"c", "z"}};
  BehaviorSubgraph sg = build_subgraph(rec, rule, space);
  AttrVocab vocab;
  VaeGraph g = vae_graph_from_subgraph(sg, space, rule, vocab);
  REQUIRE(g.size() == 3);
  CHECK(g.edges.size() == 3);
  CHECK(vocab.size() == 3);
  // slots follow the rule's field order
  std::set<int> slots(g.slot.begin(), g.slot.end());
  CHECK(slots == std::set<int>{0, 1, 2});

  BehaviorSubgraph back = vae_graph_to_subgraph(g, vocab, space, "gen");
  CHECK(back.nodes == sg.nodes);
  CHECK(back.edges == sg.edges);

  LabeledGraph lg = vae_graph_to_labeled(g, vocab);
  CHECK(lg.size() == 3);
  CHECK(lg.edges.size() == 3);

  // a vocab entry outside the space cannot be mapped back
  AttrVocab rogue;
  rogue.intern(0, "never-interned");
  VaeGraph bad;
  bad.slot = {0};
  bad.attr = {0};
  try {
    vae_graph_to_subgraph(bad, rogue, space, "gen");
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
  }
}

TEST_CASE("attr vocab intern/get round trip") {
  AttrVocab v;
  CHECK(v.intern(0, "x") == 0);
  CHECK(v.intern(1, "x") == 1);
  CHECK(v.intern(0, "x") == 0);
  CHECK(v.get(1, "x") == 1);
  CHECK_THROWS_AS(v.get(2, "zzz"), Error);
}

TEST_CASE("encoder: zeroed weights reduce mu to its bias") {
  VaeConfig cfg;
  cfg.k = 3;
  cfg.latent = 4;
  cfg.hidden = 5;
  cfg.attr_classes = 3;
  ModelParams params = init_vae_params(cfg);
  zero_params(params, "enc.");
  params.value("enc.mu.b") = Tensor::row({0.1, -0.2, 0.3, -0.4});

  VaeGraph g;
  g.slot = {0, 1, 2};
  g.attr = {0, 1, 2};
  g.edges = {{0, 1, 0}, {1, 2, 0}};
  Tensor eps({1, cfg.latent});
  Tape tape;
  EncodeRefs enc = encode_graph(tape, params, cfg, g, eps);
  const Tensor& mu = tape.value(enc.mu);
  CHECK(mu.data == std::vector<double>{0.1, -0.2, 0.3, -0.4});
  // zero eps makes z = mu
  CHECK(tape.value(enc.z).data == mu.data);

  VaeGraph big;
  big.slot = {0, 1, 2, 0};
  big.attr = {0, 0, 0, 0};
  CHECK_THROWS_AS(encode_graph(tape, params, cfg, big, eps), Error);
  VaeGraph empty;
  CHECK_THROWS_AS(encode_graph(tape, params, cfg, empty, eps), Error);
}

TEST_CASE("encoding is deterministic for fixed params and eps") {
  VaeConfig cfg;
  cfg.k = 4;
  cfg.latent = 3;
  cfg.hidden = 6;
  cfg.attr_classes = 4;
  ModelParams params = init_vae_params(cfg);
  VaeGraph g;
  g.slot = {0, 2, 3};
  g.attr = {1, 0, 3};
  g.edges = {{0, 1, 0}, {0, 2, 0}};
  Tensor eps({1, cfg.latent}, 0.3);
  Tape t1, t2;
  auto a = t1.value(encode_graph(t1, params, cfg, g, eps).z);
  auto b = t2.value(encode_graph(t2, params, cfg, g, eps).z);
  CHECK(a.data == b.data);
}

TEST_CASE("decoder with zero parameters is maximally uncertain") {
  VaeConfig cfg;
  cfg.k = 4;
  cfg.latent = 3;
  cfg.hidden = 5;
  cfg.attr_classes = 3;
  cfg.edge_classes = 2;
  ModelParams params = init_vae_params(cfg);
  zero_params(params, "dec.");
  Tape tape;
  Tensor z({1, cfg.latent}, 0.7);
  DecodeRefs dec = decode_latent(tape, params, cfg, tape.constant(z));
  const Tensor& adj = tape.value(dec.adj_probs);
  REQUIRE(adj.shape == std::vector<std::size_t>{1, 10});
  for (double p : adj.data) CHECK(p == doctest::Approx(0.5));
  const Tensor& attr = tape.value(dec.attr_logits);
  REQUIRE(attr.shape == std::vector<std::size_t>{4, 3});
  for (double v : attr.data) CHECK(v == 0.0);  // uniform softmax
  const Tensor& edge = tape.value(dec.edge_logits);
  CHECK(edge.shape == std::vector<std::size_t>{6, 2});
}

TEST_CASE("assignment DP matches brute force (property)") {
  DetRng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t k = 2 + rng.next_below(5);  // 2..6 slots
    std::size_t n = 1 + rng.next_below(k);  // n <= k
    std::vector<std::vector<double>> sim(n, std::vector<double>(k));
    for (auto& row : sim)
      for (double& v : row) v = rng.uniform();
    Assignment a = solve_assignment(sim, k);
    double got = 0;
    std::set<int> used;
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(a.row_of_node[i] >= 0);
      CHECK(used.insert(a.row_of_node[i]).second);  // injective
      got += sim[i][a.row_of_node[i]];
    }
    CHECK(got == doctest::Approx(best_assignment_score(sim, k)));
  }
  CHECK_THROWS_AS(solve_assignment({{1.0}, {1.0}}, 1), Error);  // n > k
  CHECK_THROWS_AS(solve_assignment({{1.0}}, 25), Error);        // DP cap
}

TEST_CASE("assignment picks the cross pairing when it pays") {
  std::vector<std::vector<double>> sim = {{0.1, 0.9}, {0.8, 0.2}};
  Assignment a = solve_assignment(sim, 2);
  CHECK(a.row_of_node == std::vector<int>{1, 0});
}

TEST_CASE("match_graph: identity for distinct slots, DP fallback otherwise") {
  Tensor probs = Tensor::matrix(3, 2, {0.9, 0.1,
                                       0.2, 0.8,
                                       0.5, 0.5});
  VaeGraph distinct;
  distinct.slot = {2, 0};
  distinct.attr = {0, 1};
  Assignment a = match_graph(distinct, probs, 3);
  CHECK(!a.used_fallback);
  CHECK(a.row_of_node == std::vector<int>{2, 0});

  VaeGraph dup;
  dup.slot = {0, 0};
  dup.attr = {0, 1};  // attr 0 prefers row 0, attr 1 prefers row 1
  Assignment b = match_graph(dup, probs, 3);
  CHECK(b.used_fallback);
  CHECK(b.row_of_node == std::vector<int>{0, 1});

  VaeGraph bad;
  bad.slot = {5};
  bad.attr = {0};
  CHECK_THROWS_AS(match_graph(bad, probs, 3), Error);
}

TEST_CASE("reconstruction loss closed form: uncertain decoder, k = 2") {
  // adjacency head at 0.5 everywhere, attribute/edge terms weighted out:
  // recon = sum of weights * ln 2 = (1/2 + 1/2 + 1) ln 2 = 2 ln 2
  VaeConfig cfg;
  cfg.k = 2;
  cfg.latent = 2;
  cfg.hidden = 3;
  cfg.attr_classes = 2;
  cfg.edge_classes = 1;
  cfg.lambda_f = 0.0;
  cfg.lambda_e = 0.0;
  ModelParams params = init_vae_params(cfg);
  zero_params(params, "dec.");
  VaeGraph g;
  g.slot = {0, 1};
  g.attr = {0, 1};
  g.edges = {{0, 1, 0}};
  Tape tape;
  DecodeRefs dec =
      decode_latent(tape, params, cfg, tape.constant(Tensor({1, cfg.latent})));
  Assignment X = match_graph(g, tape.value(dec.attr_logits), cfg.k);
  ReconTerms r = recon_loss(tape, cfg, g, X, dec);
  CHECK(!r.edge_term_skipped);
  CHECK(tape.scalar(r.recon) == doctest::Approx(2.0 * std::log(2.0)));

  // with no edges, the edge term is flagged as skipped
  VaeGraph lone;
  lone.slot = {0};
  lone.attr = {0};
  Tape tape2;
  DecodeRefs dec2 =
      decode_latent(tape2, params, cfg, tape2.constant(Tensor({1, cfg.latent})));
  ReconTerms r2 = recon_loss(tape2, cfg, lone,
                             match_graph(lone, tape2.value(dec2.attr_logits),
                                         cfg.k),
                             dec2);
  CHECK(r2.edge_term_skipped);
}

TEST_CASE("zero-mean zero-logvar code has zero KL, so elbo equals recon") {
  VaeConfig cfg;
  cfg.k = 2;
  cfg.latent = 2;
  cfg.hidden = 3;
  cfg.attr_classes = 2;
  cfg.edge_classes = 1;
  cfg.lambda_f = 0.0;
  cfg.lambda_e = 0.0;
  ModelParams params = init_vae_params(cfg);
  zero_params(params);  // everything: enc gives mu = logvar = 0
  VaeGraph g;
  g.slot = {0, 1};
  g.attr = {0, 1};
  g.edges = {{0, 1, 0}};
  Tape tape;
  ElboResult r = elbo_loss(tape, params, cfg, g, Tensor({1, cfg.latent}));
  CHECK(tape.scalar(r.kl) == doctest::Approx(0.0));
  CHECK(tape.scalar(r.elbo) == doctest::Approx(tape.scalar(r.recon)));
  CHECK(tape.scalar(r.elbo) == doctest::Approx(2.0 * std::log(2.0)));
  CHECK(!r.used_fallback_match);
}

TEST_CASE("elbo gradient survives a finite-difference check") {
  VaeConfig cfg;
  cfg.k = 4;
  cfg.latent = 3;
  cfg.hidden = 5;
  cfg.attr_classes = 3;
  cfg.edge_classes = 2;
  cfg.seed = 5;
  ModelParams params = init_vae_params(cfg);
  VaeGraph g;
  g.slot = {0, 1, 3};
  g.attr = {2, 0, 1};
  g.edges = {{0, 1, 1}, {1, 2, 0}};
  Tensor eps = Tensor::row({0.4, -0.7, 0.2});
  auto build = [&](Tape& t) {
    return elbo_loss(t, params, cfg, g, eps).elbo;
  };
  CHECK(grad_check(build, params) < 1e-4);
}

TEST_CASE("vae training reduces the elbo deterministically") {
  FraudFixture fx(60, 9);
  std::vector<VaeGraph> graphs;
  AttrVocab vocab = fx.vocab;
  for (std::size_t i = 0; i < fx.subgraphs.size(); ++i)
    if (fx.y[i] == 1)
      graphs.push_back(
          vae_graph_from_subgraph(fx.subgraphs[i], fx.space, fx.rule, vocab));
  REQUIRE(graphs.size() >= 10);

  VaeConfig cfg;
  cfg.k = 2;
  cfg.latent = 4;
  cfg.hidden = 8;
  cfg.attr_classes = vocab.size();
  cfg.edge_classes = 1;
  cfg.epochs = 60;
  cfg.lr = 5e-3;
  VaeTrainResult a = train_vae(graphs, cfg);
  VaeTrainResult b = train_vae(graphs, cfg);
  REQUIRE(a.elbo_curve.size() == cfg.epochs);
  CHECK(a.elbo_curve == b.elbo_curve);
  CHECK(a.elbo_curve.back() < a.elbo_curve.front());
  CHECK_THROWS_AS(train_vae({}, cfg), Error);
}

TEST_CASE("sampling is deterministic and respects the validator") {
  FraudFixture fx(60, 9);
  std::vector<VaeGraph> graphs;
  AttrVocab vocab = fx.vocab;
  for (std::size_t i = 0; i < fx.subgraphs.size(); ++i)
    if (fx.y[i] == 1)
      graphs.push_back(
          vae_graph_from_subgraph(fx.subgraphs[i], fx.space, fx.rule, vocab));
  VaeConfig cfg;
  cfg.k = 2;
  cfg.latent = 4;
  cfg.hidden = 8;
  cfg.attr_classes = vocab.size();
  cfg.edge_classes = 1;
  cfg.epochs = 60;
  cfg.lr = 5e-3;
  VaeTrainResult t = train_vae(graphs, cfg);

  GraphValidator validator = meta_rule_validator(fx.rule);
  SampleResult s1 = sample_vae(t.params, cfg, 8, 3, 0.5, validator);
  SampleResult s2 = sample_vae(t.params, cfg, 8, 3, 0.5, validator);
  CHECK(s1.graphs.size() == s2.graphs.size());
  CHECK(s1.attempts == s2.attempts);
  REQUIRE(!s1.graphs.empty());
  for (std::size_t i = 0; i < s1.graphs.size(); ++i) {
    CHECK(s1.graphs[i].slot == s2.graphs[i].slot);
    CHECK(s1.graphs[i].attr == s2.graphs[i].attr);
    CHECK(validator(s1.graphs[i]));
  }
  CHECK(s1.rejection_rate() >= 0.0);
  CHECK(s1.rejection_rate() <= 1.0);

  // an impossible threshold rejects every draw up to the retry cap
  SampleResult none = sample_vae(t.params, cfg, 1, 3, 1.0, validator, 10);
  CHECK(none.graphs.empty());
  CHECK(none.attempts == 10);
  CHECK(none.rejected == 10);
}

TEST_CASE("meta-rule validator accepts exactly the schema shapes") {
  MetaRule clique = MetaRule::clique_over({"a", "b", "c"});
  GraphValidator v = meta_rule_validator(clique);
  VaeGraph ok;
  ok.slot = {0, 1, 2};
  ok.attr = {0, 0, 0};
  ok.edges = {{0, 1, 0}, {0, 2, 0}, {1, 2, 0}};
  CHECK(v(ok));

  VaeGraph partial = ok;
  partial.edges.pop_back();  // missing clique edge
  CHECK(!v(partial));
  VaeGraph wrong_type = ok;
  std::get<2>(wrong_type.edges[0]) = 1;
  CHECK(!v(wrong_type));
  VaeGraph dup = ok;
  dup.slot = {0, 0, 1};
  CHECK(!v(dup));
  VaeGraph empty;
  CHECK(!v(empty));
  // two nodes of a clique rule still need their single edge
  VaeGraph pair;
  pair.slot = {0, 2};
  pair.attr = {0, 0};
  pair.edges = {{0, 1, 0}};
  CHECK(v(pair));

  MetaRule star;
  star.name = "star";
  star.node_fields = {"hub", "x", "y"};
  star.clique = false;
  star.edge_specs = {{"hub", "x", 0}, {"hub", "y", 1}};
  GraphValidator vs = meta_rule_validator(star);
  VaeGraph s;
  s.slot = {0, 1, 2};
  s.attr = {0, 0, 0};
  s.edges = {{0, 1, 0}, {0, 2, 1}};
  CHECK(vs(s));
  VaeGraph cross = s;
  cross.edges.push_back({1, 2, 0});  // x-y is not a declared pair
  CHECK(!vs(cross));
  VaeGraph flipped = s;
  std::get<2>(flipped.edges[1]) = 0;  // hub-y must be type 1
  CHECK(!vs(flipped));
}

TEST_CASE("prevented loss sums flagged true-fraud amounts only") {
  std::vector<int> truth = {1, 1, 0, 1};
  std::vector<double> scores = {0.9, 0.4, 0.99, 0.5};
  std::vector<double> amounts = {100.0, 200.0, 400.0, 800.0};
  // flagged frauds at threshold 0.5: rows 0 and 3 (>= is inclusive)
  CHECK(prevented_loss(truth, scores, amounts) == doctest::Approx(900.0));
  CHECK(prevented_loss(truth, scores, amounts, 0.3) == doctest::Approx(1100.0));
  CHECK(prevented_loss(truth, scores, amounts, 0.95) == doctest::Approx(0.0));
  CHECK_THROWS_AS(prevented_loss({1}, {0.5, 0.5}, {1.0, 1.0}), Error);
}

TEST_CASE("harness with nothing hidden runs the plain detector") {
  FraudFixture fx(60, 12);
  HarnessConfig cfg;
  cfg.mode = HarnessMode::S1;
  cfg.hide = 0.0;
  cfg.repetitions = 2;
  cfg.seed = 4;
  cfg.detector.d0 = 16;
  cfg.detector.hidden = 16;
  cfg.detector.head_h1 = 16;
  cfg.detector.head_h2 = 8;
  cfg.detector.epochs = 50;
  cfg.detector.lr = 5e-3;
  HarnessResult r = strategy_harness(fx.space, fx.subgraphs, fx.y, fx.amounts,
                                     fx.rule, fx.vocab, cfg);
  REQUIRE(r.reps.size() == 2);
  for (const auto& rep : r.reps) {
    CHECK(rep.auc >= 0.0);
    CHECK(rep.auc <= 1.0);
    CHECK(rep.generated == 0);  // nothing hidden, nothing generated
    CHECK(rep.test_fraud_amount > 0.0);
    CHECK(rep.prevented <= rep.test_fraud_amount + 1e-9);
  }
  CHECK(r.auc_mean == doctest::Approx((r.reps[0].auc + r.reps[1].auc) / 2));
  // the planted signal is separable; the detector should do well
  CHECK(r.auc_mean > 0.9);

  HarnessResult again = strategy_harness(fx.space, fx.subgraphs, fx.y,
                                         fx.amounts, fx.rule, fx.vocab, cfg);
  CHECK(again.reps[0].auc == r.reps[0].auc);
  CHECK(again.reps[1].auc == r.reps[1].auc);
}

TEST_CASE("threaded harness reproduces the sequential repetitions") {
  FraudFixture fx(50, 13);
  HarnessConfig cfg;
  cfg.mode = HarnessMode::S2;
  cfg.hide = 0.5;
  cfg.repetitions = 2;
  cfg.seed = 6;
  cfg.vae.latent = 4;
  cfg.vae.hidden = 8;
  cfg.vae.epochs = 15;
  cfg.vae.lr = 5e-3;
  cfg.detector.d0 = 16;
  cfg.detector.hidden = 16;
  cfg.detector.head_h1 = 16;
  cfg.detector.head_h2 = 8;
  cfg.detector.epochs = 40;
  cfg.detector.lr = 5e-3;

  cfg.threads = 1;
  HarnessResult seq = strategy_harness(fx.space, fx.subgraphs, fx.y, fx.amounts,
                                       fx.rule, fx.vocab, cfg);
  cfg.threads = 2;
  HarnessResult par = strategy_harness(fx.space, fx.subgraphs, fx.y, fx.amounts,
                                       fx.rule, fx.vocab, cfg);
  REQUIRE(seq.reps.size() == par.reps.size());
  for (std::size_t i = 0; i < seq.reps.size(); ++i) {
    CHECK(seq.reps[i].auc == par.reps[i].auc);
    CHECK(seq.reps[i].prevented == par.reps[i].prevented);
    CHECK(seq.reps[i].generated == par.reps[i].generated);
  }
  // S2 hides half the training frauds from nothing -- the detector still
  // sees them; generated graphs land in the test set
  for (const auto& rep : seq.reps) CHECK(rep.generated > 0);
}

TEST_CASE("harness grid produces one row per h with csv serialization") {
  FraudFixture fx(50, 14);
  HarnessConfig cfg;
  cfg.mode = HarnessMode::S1;
  cfg.repetitions = 1;
  cfg.seed = 2;
  cfg.vae.latent = 4;
  cfg.vae.hidden = 8;
  cfg.vae.epochs = 15;
  cfg.vae.lr = 5e-3;
  cfg.detector.d0 = 16;
  cfg.detector.hidden = 16;
  cfg.detector.head_h1 = 16;
  cfg.detector.head_h2 = 8;
  cfg.detector.epochs = 40;
  cfg.detector.lr = 5e-3;
  auto rows = harness_grid(fx.space, fx.subgraphs, fx.y, fx.amounts, fx.rule,
                           fx.vocab, cfg, {0.0, 0.5});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].h == 0.0);
  CHECK(rows[1].h == 0.5);
  std::string csv = harness_grid_csv(rows);
  CHECK(csv.rfind("h,auc_mean,auc_stdev,prevented_loss\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("harness rejects inconsistent or degenerate inputs") {
  FraudFixture fx(30, 15);
  HarnessConfig cfg;
  cfg.repetitions = 0;
  CHECK_THROWS_AS(strategy_harness(fx.space, fx.subgraphs, fx.y, fx.amounts,
                                   fx.rule, fx.vocab, cfg),
                  Error);
  cfg.repetitions = 1;
  std::vector<int> flat(fx.y.size(), 0);
  CHECK_THROWS_AS(harness_rep(fx.space, fx.subgraphs, flat, fx.amounts, fx.rule,
                              fx.vocab, cfg, 1),
                  Error);
  cfg.hide = 2.0;
  CHECK_THROWS_AS(harness_rep(fx.space, fx.subgraphs, fx.y, fx.amounts, fx.rule,
                              fx.vocab, cfg, 1),
                  Error);
  std::vector<double> short_amounts(3, 1.0);
  cfg.hide = 0.0;
  CHECK_THROWS_AS(harness_rep(fx.space, fx.subgraphs, fx.y, short_amounts,
                              fx.rule, fx.vocab, cfg, 1),
                  Error);
}
