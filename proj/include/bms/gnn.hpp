#pragma once

// Attribute embeddings, relational graph convolution, graph pooling,
// classifier heads, and the training loops shared by detection and
// prediction.

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bms/core.hpp"
#include "bms/errors.hpp"
#include "bms/numerics.hpp"

namespace bms {

// ---------------------------------------------------------------------------
// Embedding tables
// ---------------------------------------------------------------------------

// Deterministic hashed embedding: each coordinate is a pure function of
// (field, token, seed, index), scaled so E||v||^2 = 1.
inline Tensor hashed_embeddings(const AttributeSpace& space, std::size_t d0,
                                std::uint64_t seed) {
  Tensor table({space.size(), d0});
  double a = std::sqrt(3.0 / double(d0));  // uniform(-a,a) has variance 1/d0
  for (std::size_t id = 0; id < space.size(); ++id) {
    const AttributeToken& t = space.token(NodeId(id));
    std::uint64_t h = splitmix64(seed ^ 0x5eedbeddULL);
    h = splitmix64(h ^ static_cast<std::uint64_t>(t.field_id));
    for (char c : t.value_token)
      h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    for (std::size_t j = 0; j < d0; ++j) {
      std::uint64_t hj = splitmix64(h ^ (j * 0x9e3779b97f4a7c15ULL + 1));
      double u = static_cast<double>(hj >> 11) * 0x1.0p-53;  // [0,1)
      table.at(id, j) = (2.0 * u - 1.0) * a;
    }
  }
  return table;
}

// External table: JSON array of {field, token, vector}. Every node in the
// space must be covered.
inline Tensor import_embeddings(const AttributeSpace& space, std::size_t d0,
                                const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  std::map<std::pair<int, std::string>, std::vector<double>> entries;
  for (const auto& e : j) {
    entries[{e.at("field").get<int>(), e.at("token").get<std::string>()}] =
        e.at("vector").get<std::vector<double>>();
  }
  Tensor table({space.size(), d0});
  for (std::size_t id = 0; id < space.size(); ++id) {
    const AttributeToken& t = space.token(NodeId(id));
    auto it = entries.find({t.field_id, t.value_token});
    if (it == entries.end())
      throw Error(ErrorCode::MissingEmbedding,
                  "no embedding for token '" + t.value_token + "'");
    if (it->second.size() != d0)
      throw Error(ErrorCode::ShapeError, "imported embedding has wrong dim");
    std::copy(it->second.begin(), it->second.end(), &table.at(id, 0));
  }
  return table;
}

enum class EmbeddingSource { Hashed, Imported };

inline Tensor init_embeddings(const AttributeSpace& space, std::size_t d0,
                              std::uint64_t seed, EmbeddingSource source,
                              const std::string& import_path = "") {
  if (source == EmbeddingSource::Hashed) return hashed_embeddings(space, d0, seed);
  return import_embeddings(space, d0, import_path);
}

// ---------------------------------------------------------------------------
// Model configuration and parameters
// ---------------------------------------------------------------------------

struct GnnConfig {
  std::size_t d0 = 768;       // input embedding dim
  std::size_t hidden = 128;   // RGCN state dim
  std::size_t layers = 2;
  std::size_t relations = 1;
  bool mean_norm = true;      // per-relation weighted-degree normalization
  bool gated = false;         // sigmoid gate on the neighbor message
  bool trainable_emb = true;  // lookup table updated by the optimizer
  std::size_t head_h1 = 128;
  std::size_t head_h2 = 64;
  std::size_t classes = 2;
  double lr = 1e-3;           // Adam
  std::size_t epochs = 200;
  std::uint64_t seed = 1;
};

inline Tensor glorot_init(std::size_t rows, std::size_t cols, DetRng& rng) {
  Tensor t({rows, cols});
  double a = std::sqrt(6.0 / double(rows + cols));
  for (double& x : t.data) x = (2.0 * rng.uniform() - 1.0) * a;
  return t;
}

inline ModelParams init_rgcn_params(const GnnConfig& cfg) {
  DetRng rng(derive_seed(cfg.seed, "rgcn-init"));
  ModelParams p;
  p.create("proj.W", glorot_init(cfg.d0, cfg.hidden, rng));
  p.create("proj.b", Tensor({1, cfg.hidden}));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    std::string pre = "l" + std::to_string(l) + ".";
    p.create(pre + "W0", glorot_init(cfg.hidden, cfg.hidden, rng));
    for (std::size_t r = 0; r < cfg.relations; ++r)
      p.create(pre + "W" + std::to_string(r + 1),
               glorot_init(cfg.hidden, cfg.hidden, rng));
    p.create(pre + "b", Tensor({1, cfg.hidden}));
    if (cfg.gated)
      p.create(pre + "gate.W", glorot_init(cfg.hidden, cfg.hidden, rng));
  }
  p.create("head.W1", glorot_init(cfg.hidden, cfg.head_h1, rng));
  p.create("head.b1", Tensor({1, cfg.head_h1}));
  p.create("head.W2", glorot_init(cfg.head_h1, cfg.head_h2, rng));
  p.create("head.b2", Tensor({1, cfg.head_h2}));
  p.create("head.W3", glorot_init(cfg.head_h2, cfg.classes, rng));
  p.create("head.b3", Tensor({1, cfg.classes}));
  return p;
}

// ---------------------------------------------------------------------------
// Graph-side constants
// ---------------------------------------------------------------------------

// Dense per-relation message matrices M_r with M_r[i][j] = w_ij (optionally
// divided by node i's weighted degree under relation r).
inline std::vector<Tensor> relation_matrices(const HeteroGraph& graph,
                                             std::size_t n_nodes,
                                             std::size_t relations,
                                             bool mean_norm) {
  std::vector<Tensor> mats(relations, Tensor({n_nodes, n_nodes}));
  for (const auto& [e, w] : graph.edges()) {
    if (static_cast<std::size_t>(e.edge_type) >= relations)
      throw Error(ErrorCode::GraphError, "edge type exceeds relation count");
    if (static_cast<std::size_t>(e.src) >= n_nodes ||
        static_cast<std::size_t>(e.dst) >= n_nodes)
      throw Error(ErrorCode::GraphError, "dangling edge endpoint");
    mats[e.edge_type].at(e.src, e.dst) += double(w);
    mats[e.edge_type].at(e.dst, e.src) += double(w);
  }
  if (mean_norm) {
    for (auto& m : mats) {
      for (std::size_t i = 0; i < n_nodes; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n_nodes; ++j) deg += m.at(i, j);
        if (deg > 0)
          for (std::size_t j = 0; j < n_nodes; ++j) m.at(i, j) /= deg;
      }
    }
  }
  return mats;
}

// Row i averages the node states of subgraph i.
inline Tensor pooling_matrix(const std::vector<const BehaviorSubgraph*>& sgs,
                             std::size_t n_nodes) {
  Tensor P({sgs.size(), n_nodes});
  for (std::size_t i = 0; i < sgs.size(); ++i) {
    if (sgs[i]->nodes.empty())
      throw Error(ErrorCode::EmptyBehavior,
                  "empty subgraph '" + sgs[i]->record_id + "'");
    double w = 1.0 / double(sgs[i]->nodes.size());
    for (NodeId id : sgs[i]->nodes) {
      if (static_cast<std::size_t>(id) >= n_nodes)
        throw Error(ErrorCode::GraphError, "subgraph node outside space");
      P.at(i, id) = w;
    }
  }
  return P;
}

// ---------------------------------------------------------------------------
// Forward graph pieces
// ---------------------------------------------------------------------------

// embeddings -> projection -> `layers` rounds of relational convolution.
// Returns the final node states (N x hidden).
inline Tape::Ref rgcn_forward(Tape& tape, ModelParams& params,
                              const GnnConfig& cfg, Tape::Ref emb,
                              const std::vector<Tape::Ref>& rel_mats) {
  Tape::Ref h = tape.add_rowvec(tape.matmul(emb, tape.param(params, "proj.W")),
                                tape.param(params, "proj.b"));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    std::string pre = "l" + std::to_string(l) + ".";
    Tape::Ref self = tape.matmul(h, tape.param(params, pre + "W0"));
    Tape::Ref neigh = -1;
    for (std::size_t r = 0; r < cfg.relations; ++r) {
      Tape::Ref msg = tape.matmul(
          rel_mats[r], tape.matmul(h, tape.param(params, pre + "W" +
                                                             std::to_string(r + 1))));
      neigh = (neigh < 0) ? msg : tape.add(neigh, msg);
    }
    if (cfg.gated && neigh >= 0) {
      Tape::Ref gate =
          tape.sigmoid(tape.matmul(h, tape.param(params, pre + "gate.W")));
      neigh = tape.mul(neigh, gate);
    }
    Tape::Ref pre_act = neigh >= 0 ? tape.add(self, neigh) : self;
    h = tape.relu(tape.add_rowvec(pre_act, tape.param(params, pre + "b")));
  }
  return h;
}

// Three-layer fully connected head: pooled behavior vectors -> class logits.
inline Tape::Ref mlp_head(Tape& tape, ModelParams& params, Tape::Ref pooled) {
  Tape::Ref h1 = tape.relu(tape.add_rowvec(
      tape.matmul(pooled, tape.param(params, "head.W1")),
      tape.param(params, "head.b1")));
  Tape::Ref h2 = tape.relu(tape.add_rowvec(
      tape.matmul(h1, tape.param(params, "head.W2")),
      tape.param(params, "head.b2")));
  return tape.add_rowvec(tape.matmul(h2, tape.param(params, "head.W3")),
                         tape.param(params, "head.b3"));
}

// ---------------------------------------------------------------------------
// Detection training
// ---------------------------------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Stratified 80/10/10 by label, seeded.
inline SplitIndices stratified_split(const std::vector<int>& labels,
                                     std::uint64_t seed, double train_frac = 0.8,
                                     double val_frac = 0.1) {
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  SplitIndices out;
  DetRng rng(derive_seed(seed, "split"));
  for (auto& [lab, idx] : by_label) {
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.next_below(i)]);
    std::size_t n_train = static_cast<std::size_t>(idx.size() * train_frac);
    std::size_t n_val = static_cast<std::size_t>(idx.size() * val_frac);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i < n_train) out.train.push_back(idx[i]);
      else if (i < n_train + n_val) out.val.push_back(idx[i]);
      else out.test.push_back(idx[i]);
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// Edge accumulation over the training split (mirrors graphbuild::accumulate
// without pulling in that header).
inline HeteroGraph accumulate_for_training(
    const std::vector<BehaviorSubgraph>& subgraphs, const AttributeSpace& space) {
  HeteroGraph g;
  for (const auto& sg : subgraphs) {
    for (NodeId id : sg.nodes) g.ensure_node(id, space.token(id).field_id);
    for (const auto& e : sg.edges) g.add_edge(e.src, e.dst, e.edge_type, 1);
  }
  return g;
}

struct DetectTrainResult {
  ModelParams params;
  std::vector<std::string> label_vocab;
  std::vector<double> loss_curve;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<std::size_t> test_indices;   // into the input record list
  std::vector<int> test_truth;
  std::vector<int> test_pred;
  Tensor initial_embeddings;               // N x d0
  Tensor final_node_states;                // N x hidden
};

// Behavior classification: message passing on the training-split graph,
// pooling per behavior, 3-layer head, cross-entropy with Adam.
inline DetectTrainResult train_detect(
    const AttributeSpace& space,
    const std::vector<BehaviorSubgraph>& subgraphs,
    const std::vector<std::string>& labels, GnnConfig cfg,
    const Tensor* imported_embeddings = nullptr) {
  if (subgraphs.size() != labels.size())
    throw Error(ErrorCode::ShapeError, "labels/subgraphs length mismatch");

  std::vector<std::string> vocab(labels.begin(), labels.end());
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  if (vocab.size() < 2)
    throw Error(ErrorCode::DegenerateLabels, "training set has a single class");
  cfg.classes = vocab.size();

  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    y[i] = int(std::lower_bound(vocab.begin(), vocab.end(), labels[i]) -
               vocab.begin());

  SplitIndices split = stratified_split(y, cfg.seed);

  // message passing runs on the accumulated training-split graph only
  std::vector<BehaviorSubgraph> train_sgs;
  for (std::size_t i : split.train) train_sgs.push_back(subgraphs[i]);
  HeteroGraph graph = accumulate_for_training(train_sgs, space);

  std::size_t n_nodes = space.size();
  Tensor emb = imported_embeddings
                   ? *imported_embeddings
                   : hashed_embeddings(space, cfg.d0, derive_seed(cfg.seed, "emb"));
  std::vector<Tensor> rel_mats =
      relation_matrices(graph, n_nodes, cfg.relations, cfg.mean_norm);

  auto pool_for = [&](const std::vector<std::size_t>& idx) {
    std::vector<const BehaviorSubgraph*> sgs;
    for (std::size_t i : idx) sgs.push_back(&subgraphs[i]);
    return pooling_matrix(sgs, n_nodes);
  };
  Tensor P_train = pool_for(split.train);
  std::vector<int> y_train;
  for (std::size_t i : split.train) y_train.push_back(y[i]);

  ModelParams params = init_rgcn_params(cfg);
  if (cfg.trainable_emb) params.create("emb", emb);
  AdamState adam;
  std::vector<double> curve;
  Tensor final_states;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    Tape::Ref emb_ref = cfg.trainable_emb ? tape.param(params, "emb")
                                          : tape.constant(emb);
    std::vector<Tape::Ref> mats;
    for (const auto& m : rel_mats) mats.push_back(tape.constant(m));
    Tape::Ref h = rgcn_forward(tape, params, cfg, emb_ref, mats);
    Tape::Ref pooled = tape.matmul(tape.constant(P_train), h);
    Tape::Ref logits = mlp_head(tape, params, pooled);
    Tape::Ref loss = tape.softmax_cross_entropy(logits, y_train);
    double l = tape.scalar(loss);
    if (std::isnan(l)) throw Error(ErrorCode::NumericFailure, "NaN loss");
    curve.push_back(l);
    params.zero_grads();
    tape.backward(loss);
    adam_step(params, adam, cfg.lr);
    if (epoch + 1 == cfg.epochs) final_states = tape.value(h);
  }

  auto evaluate = [&](const std::vector<std::size_t>& idx,
                      std::vector<int>* pred_out) {
    if (idx.empty()) return 0.0;
    Tape tape;
    Tape::Ref emb_ref = cfg.trainable_emb ? tape.param(params, "emb")
                                          : tape.constant(emb);
    std::vector<Tape::Ref> mats;
    for (const auto& m : rel_mats) mats.push_back(tape.constant(m));
    Tape::Ref h = rgcn_forward(tape, params, cfg, emb_ref, mats);
    Tape::Ref pooled = tape.matmul(tape.constant(pool_for(idx)), h);
    Tape::Ref logits = mlp_head(tape, params, pooled);
    const Tensor& Z = tape.value(logits);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      int best = 0;
      for (std::size_t j = 1; j < Z.cols(); ++j)
        if (Z.at(i, j) > Z.at(i, best)) best = int(j);
      if (pred_out) pred_out->push_back(best);
      if (best == y[idx[i]]) ++correct;
    }
    return double(correct) / double(idx.size());
  };

  DetectTrainResult out;
  out.val_accuracy = evaluate(split.val, nullptr);
  out.test_accuracy = evaluate(split.test, &out.test_pred);
  out.test_indices = split.test;
  for (std::size_t i : split.test) out.test_truth.push_back(y[i]);
  out.label_vocab = std::move(vocab);
  out.loss_curve = std::move(curve);
  out.initial_embeddings = std::move(emb);
  out.final_node_states = std::move(final_states);
  out.params = std::move(params);
  return out;
}

// ---------------------------------------------------------------------------
// Custom-split training (fraud harness)
// ---------------------------------------------------------------------------

struct SplitTrainResult {
  ModelParams params;
  std::vector<double> loss_curve;
  std::vector<double> test_scores;  // probability of class 1
  std::vector<int> test_pred;
};

// Binary (or small-multiclass) training with caller-controlled train/test
// splits; returns class-1 probabilities on the test rows.
inline SplitTrainResult train_eval_split(
    const AttributeSpace& space, const std::vector<BehaviorSubgraph>& subgraphs,
    const std::vector<int>& y, const std::vector<std::size_t>& train_idx,
    const std::vector<std::size_t>& test_idx, const GnnConfig& cfg) {
  std::vector<BehaviorSubgraph> train_sgs;
  for (std::size_t i : train_idx) train_sgs.push_back(subgraphs[i]);
  HeteroGraph graph = accumulate_for_training(train_sgs, space);

  std::size_t n_nodes = space.size();
  Tensor emb = hashed_embeddings(space, cfg.d0, derive_seed(cfg.seed, "emb"));
  std::vector<Tensor> rel_mats =
      relation_matrices(graph, n_nodes, cfg.relations, cfg.mean_norm);

  auto pool_for = [&](const std::vector<std::size_t>& idx) {
    std::vector<const BehaviorSubgraph*> sgs;
    for (std::size_t i : idx) sgs.push_back(&subgraphs[i]);
    return pooling_matrix(sgs, n_nodes);
  };
  Tensor P_train = pool_for(train_idx);
  std::vector<int> y_train;
  for (std::size_t i : train_idx) y_train.push_back(y[i]);
  {
    std::set<int> distinct(y_train.begin(), y_train.end());
    if (distinct.size() < 2)
      throw Error(ErrorCode::DegenerateLabels, "training set has a single class");
  }

  ModelParams params = init_rgcn_params(cfg);
  if (cfg.trainable_emb) params.create("emb", emb);
  AdamState adam;
  SplitTrainResult out;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    Tape::Ref emb_ref = cfg.trainable_emb ? tape.param(params, "emb")
                                          : tape.constant(emb);
    std::vector<Tape::Ref> mats;
    for (const auto& m : rel_mats) mats.push_back(tape.constant(m));
    Tape::Ref h = rgcn_forward(tape, params, cfg, emb_ref, mats);
    Tape::Ref logits =
        mlp_head(tape, params, tape.matmul(tape.constant(P_train), h));
    Tape::Ref loss = tape.softmax_cross_entropy(logits, y_train);
    double l = tape.scalar(loss);
    if (std::isnan(l)) throw Error(ErrorCode::NumericFailure, "NaN loss");
    out.loss_curve.push_back(l);
    params.zero_grads();
    tape.backward(loss);
    adam_step(params, adam, cfg.lr);
  }

  if (!test_idx.empty()) {
    Tape tape;
    Tape::Ref emb_ref = cfg.trainable_emb ? tape.param(params, "emb")
                                          : tape.constant(emb);
    std::vector<Tape::Ref> mats;
    for (const auto& m : rel_mats) mats.push_back(tape.constant(m));
    Tape::Ref h = rgcn_forward(tape, params, cfg, emb_ref, mats);
    Tape::Ref logits =
        mlp_head(tape, params, tape.matmul(tape.constant(pool_for(test_idx)), h));
    const Tensor& Z = tape.value(logits);
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
      double mx = Z.at(i, 0);
      for (std::size_t j = 1; j < Z.cols(); ++j) mx = std::max(mx, Z.at(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < Z.cols(); ++j) sum += std::exp(Z.at(i, j) - mx);
      out.test_scores.push_back(std::exp(Z.at(i, Z.cols() - 1) - mx) / sum);
      int best = 0;
      for (std::size_t j = 1; j < Z.cols(); ++j)
        if (Z.at(i, j) > Z.at(i, best)) best = int(j);
      out.test_pred.push_back(best);
    }
  }
  out.params = std::move(params);
  return out;
}

// ---------------------------------------------------------------------------
// Node classification (prediction pipeline embeddings)
// ---------------------------------------------------------------------------

struct NodeClassResult {
  ModelParams params;
  std::vector<double> loss_curve;
  double train_accuracy = 0.0;
  Tensor node_states;  // N x hidden, final layer output
};

// Trains RGCN + a linear classifier on labeled nodes (e.g. user click-count
// classes) and exposes the final per-node states as embeddings.
inline NodeClassResult train_nodeclass(const AttributeSpace& space,
                                       const HeteroGraph& graph,
                                       const std::map<NodeId, int>& node_labels,
                                       GnnConfig cfg) {
  if (node_labels.empty())
    throw Error(ErrorCode::NoLabels, "no labeled nodes");
  int max_class = 0;
  for (const auto& [id, c] : node_labels) max_class = std::max(max_class, c);
  cfg.classes = static_cast<std::size_t>(max_class) + 1;
  if (cfg.classes < 2)
    throw Error(ErrorCode::DegenerateLabels, "single node class");

  std::size_t n_nodes = space.size();
  Tensor emb = hashed_embeddings(space, cfg.d0, derive_seed(cfg.seed, "emb"));
  std::vector<Tensor> rel_mats =
      relation_matrices(graph, n_nodes, cfg.relations, cfg.mean_norm);

  std::vector<std::size_t> rows;
  std::vector<int> y;
  for (const auto& [id, c] : node_labels) {
    rows.push_back(static_cast<std::size_t>(id));
    y.push_back(c);
  }

  ModelParams params = init_rgcn_params(cfg);
  if (cfg.trainable_emb) params.create("emb", emb);
  AdamState adam;
  NodeClassResult out;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    Tape::Ref emb_ref = cfg.trainable_emb ? tape.param(params, "emb")
                                          : tape.constant(emb);
    std::vector<Tape::Ref> mats;
    for (const auto& m : rel_mats) mats.push_back(tape.constant(m));
    Tape::Ref h = rgcn_forward(tape, params, cfg, emb_ref, mats);
    Tape::Ref labeled = tape.gather_rows(h, rows);
    Tape::Ref logits = mlp_head(tape, params, labeled);
    Tape::Ref loss = tape.softmax_cross_entropy(logits, y);
    double l = tape.scalar(loss);
    if (std::isnan(l)) throw Error(ErrorCode::NumericFailure, "NaN loss");
    out.loss_curve.push_back(l);
    params.zero_grads();
    tape.backward(loss);
    adam_step(params, adam, cfg.lr);
    if (epoch + 1 == cfg.epochs) {
      out.node_states = tape.value(h);
      const Tensor& Z = tape.value(logits);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        int best = 0;
        for (std::size_t j = 1; j < Z.cols(); ++j)
          if (Z.at(i, j) > Z.at(i, best)) best = int(j);
        if (best == y[i]) ++correct;
      }
      out.train_accuracy = double(correct) / double(rows.size());
    }
  }
  out.params = std::move(params);
  return out;
}

}  // namespace bms
