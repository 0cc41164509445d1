#pragma once

// Graph-VAE over behavioral molecular structures: encoder to a latent code,
// decoder to a probabilistic graph, node matching, ELBO losses, sampling and
// the S1/S2 fraud-detection strategy harness.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "bms/core.hpp"
#include "bms/detect.hpp"
#include "bms/errors.hpp"
#include "bms/gnn.hpp"
#include "bms/graphbuild.hpp"
#include "bms/graphmetrics.hpp"
#include "bms/numerics.hpp"

namespace bms {

// ---------------------------------------------------------------------------
// VAE-side graph representation
// ---------------------------------------------------------------------------

// Compact node-attribute vocabulary: class id <-> (field, token).
struct AttrVocab {
  std::vector<std::pair<int, std::string>> classes;
  std::map<std::pair<int, std::string>, int> index;

  int intern(int field_id, const std::string& token) {
    auto key = std::make_pair(field_id, token);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    int id = int(classes.size());
    classes.push_back(key);
    index.emplace(std::move(key), id);
    return id;
  }

  int get(int field_id, const std::string& token) const {
    auto it = index.find({field_id, token});
    if (it == index.end())
      throw Error(ErrorCode::NotFound, "unknown attr token '" + token + "'");
    return it->second;
  }

  std::size_t size() const { return classes.size(); }
};

// One behavior as the VAE sees it: nodes carry a canonical type slot and an
// attribute class; edges carry an edge class.
struct VaeGraph {
  std::vector<int> slot;   // node-type slot in [0, k)
  std::vector<int> attr;   // attribute class
  std::vector<std::tuple<int, int, int>> edges;  // (i, j, class), i < j

  std::size_t size() const { return slot.size(); }
};

inline VaeGraph vae_graph_from_subgraph(const BehaviorSubgraph& sg,
                                        const AttributeSpace& space,
                                        const MetaRule& rule, AttrVocab& vocab) {
  VaeGraph g;
  std::map<NodeId, int> local;
  for (NodeId id : sg.nodes) {
    const auto& t = space.token(id);
    int slot = rule.node_type_of(space.fields()[t.field_id]);
    if (slot < 0)
      throw Error(ErrorCode::RuleError, "node field outside meta-rule");
    local[id] = int(g.slot.size());
    g.slot.push_back(slot);
    g.attr.push_back(vocab.intern(t.field_id, t.value_token));
  }
  for (const auto& e : sg.edges) {
    int u = local.at(e.src), v = local.at(e.dst);
    if (u > v) std::swap(u, v);
    g.edges.emplace_back(u, v, e.edge_type);
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

inline LabeledGraph vae_graph_to_labeled(const VaeGraph& g, const AttrVocab& vocab) {
  LabeledGraph out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& [field, token] = vocab.classes.at(g.attr[i]);
    out.labels.emplace_back(g.slot[i], token);
  }
  out.edges = g.edges;
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct VaeConfig {
  std::size_t k = 11;        // node-type slot count = max nodes
  std::size_t latent = 32;   // c
  std::size_t hidden = 64;
  std::size_t enc_layers = 2;
  std::size_t attr_classes = 0;
  std::size_t edge_classes = 1;
  double lambda_a = 1.0, lambda_f = 1.0, lambda_e = 1.0;
  double lr = 1e-3;
  std::size_t epochs = 200;
  std::uint64_t seed = 1;
};

inline ModelParams init_vae_params(const VaeConfig& cfg) {
  DetRng rng(derive_seed(cfg.seed, "vae-init"));
  ModelParams p;
  p.create("enc.embed", glorot_init(cfg.attr_classes, cfg.hidden, rng));
  for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
    std::string pre = "enc.l" + std::to_string(l) + ".";
    p.create(pre + "W0", glorot_init(cfg.hidden, cfg.hidden, rng));
    p.create(pre + "W1", glorot_init(cfg.hidden, cfg.hidden, rng));
    p.create(pre + "b", Tensor({1, cfg.hidden}));
  }
  p.create("enc.mu.W", glorot_init(cfg.hidden, cfg.latent, rng));
  p.create("enc.mu.b", Tensor({1, cfg.latent}));
  p.create("enc.lv.W", glorot_init(cfg.hidden, cfg.latent, rng));
  p.create("enc.lv.b", Tensor({1, cfg.latent}));

  std::size_t pairs = cfg.k * (cfg.k + 1) / 2;            // incl. diagonal
  std::size_t off_pairs = cfg.k * (cfg.k - 1) / 2;
  p.create("dec.W1", glorot_init(cfg.latent, cfg.hidden, rng));
  p.create("dec.b1", Tensor({1, cfg.hidden}));
  p.create("dec.W2", glorot_init(cfg.hidden, cfg.hidden, rng));
  p.create("dec.b2", Tensor({1, cfg.hidden}));
  p.create("dec.adj.W", glorot_init(cfg.hidden, pairs, rng));
  p.create("dec.adj.b", Tensor({1, pairs}));
  p.create("dec.attr.W", glorot_init(cfg.hidden, cfg.k * cfg.attr_classes, rng));
  p.create("dec.attr.b", Tensor({1, cfg.k * cfg.attr_classes}));
  p.create("dec.edge.W", glorot_init(cfg.hidden, off_pairs * cfg.edge_classes, rng));
  p.create("dec.edge.b", Tensor({1, off_pairs * cfg.edge_classes}));
  return p;
}

// Upper-triangle (incl. diagonal) flat index for the adjacency head.
inline std::size_t tri_index(std::size_t k, std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return a * k - a * (a + 1) / 2 + b;
}

// Strict upper-triangle flat index for the edge-attribute head.
inline std::size_t off_tri_index(std::size_t k, std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return a * k - a * (a + 1) / 2 + (b - a - 1);
}

struct EncodeRefs {
  Tape::Ref mu = -1, logvar = -1, z = -1;
};

struct LatentCode {
  std::vector<double> mu, logvar, z, eps;
};

inline EncodeRefs encode_graph(Tape& tape, ModelParams& params,
                               const VaeConfig& cfg, const VaeGraph& g,
                               const Tensor& eps) {
  std::size_t n = g.size();
  if (n > cfg.k) throw Error(ErrorCode::TooManyNodes, "graph larger than k");
  if (n == 0) throw Error(ErrorCode::EmptyBehavior, "empty graph");

  std::vector<std::size_t> attr_idx(g.attr.begin(), g.attr.end());
  Tape::Ref x = tape.gather_rows(tape.param(params, "enc.embed"), attr_idx);

  // single-relation mean-normalized adjacency inside the behavior
  Tensor A({n, n});
  for (const auto& [u, v, t] : g.edges) {
    A.at(u, v) += 1.0;
    A.at(v, u) += 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0;
    for (std::size_t j = 0; j < n; ++j) deg += A.at(i, j);
    if (deg > 0)
      for (std::size_t j = 0; j < n; ++j) A.at(i, j) /= deg;
  }
  Tape::Ref a_ref = tape.constant(A);

  Tape::Ref h = x;
  for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
    std::string pre = "enc.l" + std::to_string(l) + ".";
    Tape::Ref self = tape.matmul(h, tape.param(params, pre + "W0"));
    Tape::Ref neigh =
        tape.matmul(a_ref, tape.matmul(h, tape.param(params, pre + "W1")));
    h = tape.relu(
        tape.add_rowvec(tape.add(self, neigh), tape.param(params, pre + "b")));
  }
  Tape::Ref pooled = tape.mean_rows(h);
  EncodeRefs out;
  out.mu = tape.add_rowvec(tape.matmul(pooled, tape.param(params, "enc.mu.W")),
                           tape.param(params, "enc.mu.b"));
  out.logvar = tape.add_rowvec(tape.matmul(pooled, tape.param(params, "enc.lv.W")),
                               tape.param(params, "enc.lv.b"));
  out.z = tape.reparam(out.mu, out.logvar, eps);
  return out;
}

struct DecodeRefs {
  Tape::Ref adj_probs = -1;    // (1, k(k+1)/2), sigmoid
  Tape::Ref attr_logits = -1;  // (k, attr_classes)
  Tape::Ref edge_logits = -1;  // (k(k-1)/2, edge_classes)
};

inline DecodeRefs decode_latent(Tape& tape, ModelParams& params,
                                const VaeConfig& cfg, Tape::Ref z) {
  Tape::Ref h1 = tape.relu(tape.add_rowvec(
      tape.matmul(z, tape.param(params, "dec.W1")), tape.param(params, "dec.b1")));
  Tape::Ref h2 = tape.relu(tape.add_rowvec(
      tape.matmul(h1, tape.param(params, "dec.W2")), tape.param(params, "dec.b2")));
  DecodeRefs out;
  out.adj_probs = tape.sigmoid(tape.add_rowvec(
      tape.matmul(h2, tape.param(params, "dec.adj.W")),
      tape.param(params, "dec.adj.b")));
  // heads come out flat; reshape by slicing at use sites
  Tape::Ref attr_flat = tape.add_rowvec(
      tape.matmul(h2, tape.param(params, "dec.attr.W")),
      tape.param(params, "dec.attr.b"));
  Tape::Ref edge_flat = tape.add_rowvec(
      tape.matmul(h2, tape.param(params, "dec.edge.W")),
      tape.param(params, "dec.edge.b"));
  out.attr_logits = tape.reshape(attr_flat, {cfg.k, cfg.attr_classes});
  out.edge_logits =
      tape.reshape(edge_flat, {cfg.k * (cfg.k - 1) / 2, cfg.edge_classes});
  return out;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

struct Assignment {
  std::vector<int> row_of_node;  // input node i -> decoded slot row
  bool used_fallback = false;    // identity mode fell back to assignment
};

// Exact maximum-similarity rectangular assignment via bitmask DP over the k
// decoded slots; deterministic smallest-row tie break.
inline Assignment solve_assignment(const std::vector<std::vector<double>>& sim,
                                   std::size_t k) {
  std::size_t n = sim.size();
  if (n > k) throw Error(ErrorCode::TooManyNodes, "more nodes than slots");
  if (k > 20) throw Error(ErrorCode::TooManyNodes, "assignment DP cap is k<=20");
  std::size_t full = std::size_t(1) << k;
  const double NEG = -1e18;
  // dp[mask] = best score assigning the first popcount-limited nodes; we
  // process node i = number of rows consumed so far.
  std::vector<double> dp(full, NEG);
  std::vector<int> choice(full, -1);
  dp[0] = 0.0;
  // iterate masks in order of popcount via simple loop (masks with popcount
  // p transition to p+1); standard subset DP ordering works since mask
  // grows strictly.
  for (std::size_t mask = 0; mask < full; ++mask) {
    if (dp[mask] == NEG) continue;
    std::size_t i = std::size_t(__builtin_popcountll(mask));
    if (i >= n) continue;
    for (std::size_t r = 0; r < k; ++r) {
      if (mask & (std::size_t(1) << r)) continue;
      std::size_t next = mask | (std::size_t(1) << r);
      double v = dp[mask] + sim[i][r];
      if (v > dp[next]) {
        dp[next] = v;
        choice[next] = int(r);
      }
    }
  }
  // best final mask with popcount n
  std::size_t best_mask = 0;
  double best = NEG;
  for (std::size_t mask = 0; mask < full; ++mask) {
    if (std::size_t(__builtin_popcountll(mask)) != n) continue;
    if (dp[mask] > best + 1e-15) {
      best = dp[mask];
      best_mask = mask;
    }
  }
  // walk back
  Assignment out;
  out.row_of_node.assign(n, -1);
  std::size_t mask = best_mask;
  for (std::size_t i = n; i-- > 0;) {
    int r = choice[mask];
    out.row_of_node[i] = r;
    mask &= ~(std::size_t(1) << r);
  }
  return out;
}

// Identity matching on canonical node-type slots; exact assignment on the
// decoded node-attribute probabilities when slots collide.
inline Assignment match_graph(const VaeGraph& g, const Tensor& attr_probs,
                              std::size_t k) {
  std::set<int> seen;
  bool duplicates = false;
  for (int s : g.slot) {
    if (!seen.insert(s).second) duplicates = true;
    if (s < 0 || std::size_t(s) >= k)
      throw Error(ErrorCode::TooManyNodes, "slot outside [0,k)");
  }
  if (!duplicates) {
    Assignment a;
    for (int s : g.slot) a.row_of_node.push_back(s);
    return a;
  }
  std::vector<std::vector<double>> sim(g.size(), std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t r = 0; r < k; ++r)
      sim[i][r] = attr_probs.at(r, g.attr[i]);
  Assignment a = solve_assignment(sim, k);
  a.used_fallback = true;
  return a;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct ReconTerms {
  Tape::Ref recon = -1;  // -log p(G|z), weighted cross-entropy terms
  bool edge_term_skipped = false;
};

// Cross-entropy reconstruction terms against the matched probabilistic
// graph. Input adjacency carries ones on the diagonal for existing nodes.
inline ReconTerms recon_loss(Tape& tape, const VaeConfig& cfg, const VaeGraph& g,
                             const Assignment& X, const DecodeRefs& dec) {
  std::size_t k = cfg.k, n = g.size();
  std::size_t pairs = k * (k + 1) / 2;

  // A' = X A X^T with self-ones: diag 1 on assigned rows, 1 on matched edges
  Tensor target({1, pairs});
  Tensor weight({1, pairs});
  for (std::size_t i = 0; i < n; ++i)
    target.data[tri_index(k, X.row_of_node[i], X.row_of_node[i])] = 1.0;
  for (const auto& [u, v, cls] : g.edges)
    target.data[tri_index(k, X.row_of_node[u], X.row_of_node[v])] = 1.0;
  // diagonal entries weigh 1/k; each unordered off-diagonal pair appears
  // twice in the a != b sum, so weight 2/(k(k-1))
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a; b < k; ++b)
      weight.data[tri_index(k, a, b)] =
          (a == b) ? 1.0 / double(k) : 2.0 / double(k * (k - 1));
  Tape::Ref log_p_adj = tape.bernoulli_ll(dec.adj_probs, std::move(target),
                                          std::move(weight));

  // node attributes: (1/n) sum_i log F'_i[attr_i]
  std::vector<int> attr_class(k, 0);
  std::vector<double> attr_weight(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    attr_class[X.row_of_node[i]] = g.attr[i];
    attr_weight[X.row_of_node[i]] = 1.0 / double(n);
  }
  Tape::Ref log_p_attr =
      tape.categorical_ll(dec.attr_logits, attr_class, attr_weight);

  // edge attributes: (1/(||A||_1 - n)) sum over ordered matched pairs; with
  // self-ones, ||A||_1 - n = 2|edges|
  ReconTerms out;
  Tape::Ref log_p_edge = -1;
  if (!g.edges.empty()) {
    std::vector<int> edge_class(k * (k - 1) / 2, 0);
    std::vector<double> edge_weight(k * (k - 1) / 2, 0.0);
    for (const auto& [u, v, cls] : g.edges) {
      std::size_t idx = off_tri_index(k, X.row_of_node[u], X.row_of_node[v]);
      edge_class[idx] = cls;
      edge_weight[idx] = 1.0 / double(g.edges.size());
    }
    log_p_edge = tape.categorical_ll(dec.edge_logits, edge_class, edge_weight);
  } else {
    out.edge_term_skipped = true;
  }

  std::vector<std::pair<double, Tape::Ref>> terms{
      {-cfg.lambda_a, log_p_adj}, {-cfg.lambda_f, log_p_attr}};
  if (log_p_edge >= 0) terms.push_back({-cfg.lambda_e, log_p_edge});
  out.recon = tape.weighted_sum(terms);
  return out;
}

struct ElboResult {
  Tape::Ref elbo = -1;
  Tape::Ref recon = -1;
  Tape::Ref kl = -1;
  bool edge_term_skipped = false;
  bool used_fallback_match = false;
};

// Full loss for one behavior: reconstruction + KL, with matching done on
// the decoded attribute probabilities.
inline ElboResult elbo_loss(Tape& tape, ModelParams& params, const VaeConfig& cfg,
                            const VaeGraph& g, const Tensor& eps) {
  EncodeRefs enc = encode_graph(tape, params, cfg, g, eps);
  DecodeRefs dec = decode_latent(tape, params, cfg, enc.z);

  // matching reads the decoded attribute probabilities as plain values
  Tensor attr_probs({cfg.k, cfg.attr_classes});
  {
    const Tensor& Z = tape.value(dec.attr_logits);
    for (std::size_t r = 0; r < cfg.k; ++r) {
      double mx = Z.at(r, 0);
      for (std::size_t c = 1; c < cfg.attr_classes; ++c)
        mx = std::max(mx, Z.at(r, c));
      double sum = 0;
      for (std::size_t c = 0; c < cfg.attr_classes; ++c)
        sum += std::exp(Z.at(r, c) - mx);
      for (std::size_t c = 0; c < cfg.attr_classes; ++c)
        attr_probs.at(r, c) = std::exp(Z.at(r, c) - mx) / sum;
    }
  }
  Assignment X = match_graph(g, attr_probs, cfg.k);
  ReconTerms rec = recon_loss(tape, cfg, g, X, dec);

  ElboResult out;
  out.kl = tape.gaussian_kl(enc.mu, enc.logvar);
  out.recon = rec.recon;
  out.elbo = tape.weighted_sum({{1.0, rec.recon}, {1.0, out.kl}});
  out.edge_term_skipped = rec.edge_term_skipped;
  out.used_fallback_match = X.used_fallback;
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct VaeTrainResult {
  ModelParams params;
  std::vector<double> elbo_curve;  // mean per epoch
};

inline VaeTrainResult train_vae(const std::vector<VaeGraph>& graphs,
                                const VaeConfig& cfg) {
  if (graphs.empty()) throw Error(ErrorCode::EmptyInput, "no training graphs");
  ModelParams params = init_vae_params(cfg);
  AdamState adam;
  VaeTrainResult out;
  DetRng eps_rng(derive_seed(cfg.seed, "vae-eps"));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    params.zero_grads();
    double total = 0.0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
      Tensor eps({1, cfg.latent});
      for (double& e : eps.data) e = eps_rng.normal();
      Tape tape;
      ElboResult r = elbo_loss(tape, params, cfg, graphs[gi], eps);
      Tape::Ref scaled = tape.scale(r.elbo, 1.0 / double(graphs.size()));
      total += tape.scalar(r.elbo);
      tape.backward(scaled);
    }
    double mean = total / double(graphs.size());
    if (std::isnan(mean)) throw Error(ErrorCode::NumericFailure, "NaN elbo");
    out.elbo_curve.push_back(mean);
    adam_step(params, adam, cfg.lr);
  }
  out.params = std::move(params);
  return out;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

struct SampleResult {
  std::vector<VaeGraph> graphs;
  std::size_t attempts = 0;
  std::size_t rejected = 0;
  double rejection_rate() const {
    return attempts ? double(rejected) / double(attempts) : 0.0;
  }
};

using GraphValidator = std::function<bool(const VaeGraph&)>;

// z ~ N(0, I); nodes kept where the diagonal probability exceeds the
// threshold, edges where the pair probability does and both ends are kept;
// attributes by argmax. Schema-invalid samples are rejected and retried.
inline SampleResult sample_vae(ModelParams& params, const VaeConfig& cfg,
                               std::size_t count, std::uint64_t seed,
                               double threshold = 0.5,
                               const GraphValidator& valid = nullptr,
                               std::size_t retry_cap_per_graph = 50) {
  DetRng rng(derive_seed(seed, "vae-sample"));
  SampleResult out;
  for (std::size_t want = 0; want < count; ++want) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < retry_cap_per_graph; ++attempt) {
      ++out.attempts;
      Tensor z({1, cfg.latent});
      for (double& v : z.data) v = rng.normal();
      Tape tape;
      DecodeRefs dec = decode_latent(tape, params, cfg, tape.constant(z));
      const Tensor& adj = tape.value(dec.adj_probs);
      const Tensor& attr = tape.value(dec.attr_logits);
      const Tensor& edge = tape.value(dec.edge_logits);

      VaeGraph g;
      std::vector<int> node_of_slot(cfg.k, -1);
      for (std::size_t a = 0; a < cfg.k; ++a) {
        if (adj.data[tri_index(cfg.k, a, a)] > threshold) {
          node_of_slot[a] = int(g.slot.size());
          g.slot.push_back(int(a));
          int best = 0;
          for (std::size_t c = 1; c < cfg.attr_classes; ++c)
            if (attr.at(a, c) > attr.at(a, best)) best = int(c);
          g.attr.push_back(best);
        }
      }
      for (std::size_t a = 0; a < cfg.k; ++a)
        for (std::size_t b = a + 1; b < cfg.k; ++b) {
          if (node_of_slot[a] < 0 || node_of_slot[b] < 0) continue;
          if (adj.data[tri_index(cfg.k, a, b)] <= threshold) continue;
          std::size_t ei = off_tri_index(cfg.k, a, b);
          int best = 0;
          for (std::size_t c = 1; c < cfg.edge_classes; ++c)
            if (edge.at(ei, c) > edge.at(ei, best)) best = int(c);
          g.edges.emplace_back(node_of_slot[a], node_of_slot[b], best);
        }
      if (!valid || valid(g)) {
        out.graphs.push_back(std::move(g));
        accepted = true;
        break;
      }
      ++out.rejected;
    }
    if (!accepted) break;  // partial batch; caller sees graphs.size() < count
  }
  return out;
}

// Generated graph back into the global id space. Tokens always exist (the
// decoder can only emit vocabulary classes), so the space stays const.
inline BehaviorSubgraph vae_graph_to_subgraph(const VaeGraph& g,
                                              const AttrVocab& vocab,
                                              const AttributeSpace& space,
                                              const std::string& record_id) {
  BehaviorSubgraph sg;
  sg.record_id = record_id;
  std::vector<NodeId> ids;
  for (int a : g.attr) {
    const auto& [field, token] = vocab.classes.at(a);
    auto id = space.lookup(field, token);
    if (!id)
      throw Error(ErrorCode::NotFound, "generated token outside the space");
    ids.push_back(*id);
  }
  sg.nodes = ids;
  std::sort(sg.nodes.begin(), sg.nodes.end());
  sg.nodes.erase(std::unique(sg.nodes.begin(), sg.nodes.end()), sg.nodes.end());
  for (const auto& [u, v, cls] : g.edges) {
    NodeId a = ids[u], b = ids[v];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    sg.edges.push_back(TypedEdge{a, b, cls});
  }
  std::sort(sg.edges.begin(), sg.edges.end());
  sg.edges.erase(std::unique(sg.edges.begin(), sg.edges.end()), sg.edges.end());
  return sg;
}

// Schema check for sampled graphs: nonempty, one node per type slot, edges
// permitted by the rule (any distinct pair with type 0 for clique rules,
// listed pairs otherwise), and for clique rules the full clique present.
inline GraphValidator meta_rule_validator(const MetaRule& rule) {
  return [rule](const VaeGraph& g) {
    if (g.slot.empty()) return false;
    std::set<int> seen;
    for (int s : g.slot)
      if (!seen.insert(s).second) return false;
    if (rule.clique) {
      std::size_t n = g.slot.size();
      if (g.edges.size() != n * (n - 1) / 2) return false;
      for (const auto& [u, v, t] : g.edges)
        if (t != 0) return false;
      return true;
    }
    for (const auto& [u, v, t] : g.edges) {
      bool ok = false;
      for (const auto& [fa, fb, et] : rule.edge_specs) {
        int sa = rule.node_type_of(fa), sb = rule.node_type_of(fb);
        if (et == t && ((g.slot[u] == sa && g.slot[v] == sb) ||
                        (g.slot[u] == sb && g.slot[v] == sa))) {
          ok = true;
          break;
        }
      }
      if (!ok) return false;
    }
    return true;
  };
}

// ---------------------------------------------------------------------------
// S1/S2 strategy harness
// ---------------------------------------------------------------------------

// Loss prevented by flagging: summed amount over truly fraudulent rows whose
// score clears the threshold. Injected synthetic rows carry amount 0.
inline double prevented_loss(const std::vector<int>& truth,
                             const std::vector<double>& scores,
                             const std::vector<double>& amounts,
                             double threshold = 0.5) {
  if (truth.size() != scores.size() || truth.size() != amounts.size())
    throw Error(ErrorCode::ShapeError, "prevented_loss: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == 1 && scores[i] >= threshold) total += amounts[i];
  return total;
}

enum class HarnessMode { S1, S2 };

struct HarnessConfig {
  HarnessMode mode = HarnessMode::S1;
  double hide = 0.0;              // fraction of frauds hidden from the VAE
  bool augment = false;           // S1: keep hidden frauds alongside generated
  std::size_t repetitions = 1;
  double test_fraction = 0.2;
  double flag_threshold = 0.5;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  VaeConfig vae;
  GnnConfig detector;             // classes forced to 2
};

struct HarnessRep {
  double auc = 0.0;
  double prevented = 0.0;
  double test_fraud_amount = 0.0;  // real frauds in this repetition's test set
  double rejection_rate = 0.0;
  std::size_t generated = 0;
};

struct HarnessResult {
  std::vector<HarnessRep> reps;
  double auc_mean = 0.0, auc_stdev = 0.0;
  double prevented_mean = 0.0;
  double test_fraud_amount_mean = 0.0;
};

namespace detail {

inline void shuffle_idx(std::vector<std::size_t>& v, DetRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.next_below(i)]);
}

}  // namespace detail

// One harness repetition; everything derived from `rep_seed`.
inline HarnessRep harness_rep(const AttributeSpace& space,
                              const std::vector<BehaviorSubgraph>& subgraphs,
                              const std::vector<int>& y,
                              const std::vector<double>& amounts,
                              const MetaRule& rule, const AttrVocab& vocab,
                              const HarnessConfig& cfg, std::uint64_t rep_seed) {
  if (subgraphs.size() != y.size() || y.size() != amounts.size())
    throw Error(ErrorCode::ShapeError, "harness: input length mismatch");
  if (cfg.hide < 0.0 || cfg.hide > 1.0)
    throw Error(ErrorCode::InfeasibleConfig, "hide fraction outside [0,1]");

  DetRng rng(derive_seed(rep_seed, "split"));
  std::vector<std::size_t> fraud_idx, clean_idx;
  for (std::size_t i = 0; i < y.size(); ++i)
    (y[i] == 1 ? fraud_idx : clean_idx).push_back(i);
  if (fraud_idx.empty() || clean_idx.empty())
    throw Error(ErrorCode::DegenerateLabels, "harness needs both classes");
  detail::shuffle_idx(fraud_idx, rng);
  detail::shuffle_idx(clean_idx, rng);

  auto cut = [&](std::vector<std::size_t>& v) {
    std::size_t n_test = std::size_t(std::llround(cfg.test_fraction * v.size()));
    n_test = std::min(std::max<std::size_t>(n_test, 1), v.size() - 1);
    std::vector<std::size_t> test(v.end() - n_test, v.end());
    v.resize(v.size() - n_test);
    return test;
  };
  std::vector<std::size_t> fraud_test = cut(fraud_idx);
  std::vector<std::size_t> clean_test = cut(clean_idx);
  // fraud_idx / clean_idx now hold the training rows

  std::size_t n_hidden = std::size_t(std::llround(cfg.hide * fraud_idx.size()));
  n_hidden = std::min(n_hidden, fraud_idx.size());
  std::vector<std::size_t> hidden(fraud_idx.end() - n_hidden, fraud_idx.end());
  std::vector<std::size_t> visible(fraud_idx.begin(), fraud_idx.end() - n_hidden);
  if (visible.empty())
    throw Error(ErrorCode::InfeasibleConfig,
                "hide fraction leaves no fraud to train the generator");

  HarnessRep rep;
  std::vector<BehaviorSubgraph> gen_sgs;
  if (n_hidden > 0) {
    VaeConfig vc = cfg.vae;
    vc.k = rule.node_fields.size();
    vc.attr_classes = vocab.size();
    vc.edge_classes = std::size_t(rule.edge_type_count());
    vc.seed = derive_seed(rep_seed, "vae");
    AttrVocab vocab_copy = vocab;  // intern is a no-op for known tokens
    std::vector<VaeGraph> train_graphs;
    for (std::size_t i : visible)
      train_graphs.push_back(
          vae_graph_from_subgraph(subgraphs[i], space, rule, vocab_copy));
    VaeTrainResult vt = train_vae(train_graphs, vc);
    SampleResult samples =
        sample_vae(vt.params, vc, n_hidden, derive_seed(rep_seed, "sample"),
                   0.5, meta_rule_validator(rule));
    rep.rejection_rate = samples.rejection_rate();
    rep.generated = samples.graphs.size();
    for (std::size_t j = 0; j < samples.graphs.size(); ++j)
      gen_sgs.push_back(vae_graph_to_subgraph(
          samples.graphs[j], vocab, space, "gen-" + std::to_string(j)));
  }

  // assemble detector rows: real records first, generated appended
  std::vector<BehaviorSubgraph> rows = subgraphs;
  std::vector<int> labels = y;
  std::vector<double> row_amount = amounts;
  std::vector<std::size_t> gen_rows;
  for (auto& sg : gen_sgs) {
    gen_rows.push_back(rows.size());
    rows.push_back(sg);
    labels.push_back(1);
    row_amount.push_back(0.0);  // synthetic money is not at stake
  }

  std::vector<std::size_t> train_rows = clean_idx;
  std::vector<std::size_t> test_rows;
  test_rows.insert(test_rows.end(), clean_test.begin(), clean_test.end());
  test_rows.insert(test_rows.end(), fraud_test.begin(), fraud_test.end());
  if (cfg.mode == HarnessMode::S1) {
    // hidden frauds leave training; generated ones stand in for them
    train_rows.insert(train_rows.end(), visible.begin(), visible.end());
    if (cfg.augment)
      train_rows.insert(train_rows.end(), hidden.begin(), hidden.end());
    train_rows.insert(train_rows.end(), gen_rows.begin(), gen_rows.end());
  } else {
    // S2: full real training set; generated frauds appear only at test time
    train_rows.insert(train_rows.end(), visible.begin(), visible.end());
    train_rows.insert(train_rows.end(), hidden.begin(), hidden.end());
    test_rows.insert(test_rows.end(), gen_rows.begin(), gen_rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  GnnConfig det = cfg.detector;
  det.classes = 2;
  det.relations = std::size_t(rule.edge_type_count());
  det.seed = derive_seed(rep_seed, "detector");
  SplitTrainResult fit =
      train_eval_split(space, rows, labels, train_rows, test_rows, det);

  std::vector<int> truth;
  std::vector<double> amt;
  for (std::size_t r : test_rows) {
    truth.push_back(labels[r]);
    amt.push_back(row_amount[r]);
  }
  rep.auc = auc_score(truth, fit.test_scores);
  rep.prevented =
      prevented_loss(truth, fit.test_scores, amt, cfg.flag_threshold);
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == 1) rep.test_fraud_amount += amt[i];
  return rep;
}

inline HarnessResult strategy_harness(const AttributeSpace& space,
                                      const std::vector<BehaviorSubgraph>& subgraphs,
                                      const std::vector<int>& y,
                                      const std::vector<double>& amounts,
                                      const MetaRule& rule, const AttrVocab& vocab,
                                      const HarnessConfig& cfg) {
  if (cfg.repetitions == 0)
    throw Error(ErrorCode::EmptyInput, "need at least one repetition");
  HarnessResult out;
  out.reps.resize(cfg.repetitions);
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < cfg.repetitions; ++r)
    seeds.push_back(derive_seed(cfg.seed, "rep-" + std::to_string(r)));

  auto run = [&](std::size_t r) {
    out.reps[r] =
        harness_rep(space, subgraphs, y, amounts, rule, vocab, cfg, seeds[r]);
  };
  if (cfg.threads > 1 && cfg.repetitions > 1) {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    std::size_t n_threads = std::min(cfg.threads, cfg.repetitions);
    std::vector<std::exception_ptr> errors(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t r; (r = next.fetch_add(1)) < cfg.repetitions;) run(r);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (std::size_t r = 0; r < cfg.repetitions; ++r) run(r);
  }

  for (const auto& rep : out.reps) {
    out.auc_mean += rep.auc;
    out.prevented_mean += rep.prevented;
    out.test_fraud_amount_mean += rep.test_fraud_amount;
  }
  double n = double(out.reps.size());
  out.auc_mean /= n;
  out.prevented_mean /= n;
  out.test_fraud_amount_mean /= n;
  double var = 0.0;
  for (const auto& rep : out.reps)
    var += (rep.auc - out.auc_mean) * (rep.auc - out.auc_mean);
  out.auc_stdev = out.reps.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  return out;
}

struct HarnessGridRow {
  double h;
  double auc_mean, auc_stdev, prevented_mean;
};

inline std::vector<HarnessGridRow> harness_grid(
    const AttributeSpace& space, const std::vector<BehaviorSubgraph>& subgraphs,
    const std::vector<int>& y, const std::vector<double>& amounts,
    const MetaRule& rule, const AttrVocab& vocab, HarnessConfig cfg,
    const std::vector<double>& h_values) {
  std::vector<HarnessGridRow> rows;
  for (double h : h_values) {
    cfg.hide = h;
    HarnessResult r =
        strategy_harness(space, subgraphs, y, amounts, rule, vocab, cfg);
    rows.push_back({h, r.auc_mean, r.auc_stdev, r.prevented_mean});
  }
  return rows;
}

inline std::string harness_grid_csv(const std::vector<HarnessGridRow>& rows) {
  std::ostringstream os;
  os.precision(17);  // round-trippable doubles
  os << "h,auc_mean,auc_stdev,prevented_loss\n";
  for (const auto& r : rows)
    os << r.h << "," << r.auc_mean << "," << r.auc_stdev << ","
       << r.prevented_mean << "\n";
  return os.str();
}

}  // namespace bms
