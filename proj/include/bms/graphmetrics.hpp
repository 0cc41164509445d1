#pragma once

// Structure-similarity metrics for generated graphs: Gaussian-kernel
// adjacency similarity (KSI), 4-node graphlet orbit signatures, labeled
// canonical forms, and the Novel / Unique fractions.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bms/core.hpp"
#include "bms/errors.hpp"

namespace bms {

// Attribute-labeled graph detached from the global id space; node order is
// local. Edge multiplicities are already thresholded away (binary).
struct LabeledGraph {
  std::vector<std::pair<int, std::string>> labels;  // (node type, token)
  std::vector<std::tuple<int, int, int>> edges;     // (i, j, etype), i < j

  std::size_t size() const { return labels.size(); }

  static LabeledGraph from_subgraph(const BehaviorSubgraph& sg,
                                    const AttributeSpace& space) {
    LabeledGraph g;
    std::map<NodeId, int> local;
    for (NodeId id : sg.nodes) {
      local[id] = int(g.labels.size());
      const auto& t = space.token(id);
      g.labels.emplace_back(t.field_id, t.value_token);
    }
    for (const auto& e : sg.edges) {
      int u = local.at(e.src), v = local.at(e.dst);
      if (u > v) std::swap(u, v);
      g.edges.emplace_back(u, v, e.edge_type);
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    return g;
  }

  std::vector<std::vector<bool>> adjacency() const {
    std::vector<std::vector<bool>> a(size(), std::vector<bool>(size(), false));
    for (const auto& [u, v, t] : edges) {
      a[u][v] = true;
      a[v][u] = true;
    }
    return a;
  }
};

// ---------------------------------------------------------------------------
// KSI
// ---------------------------------------------------------------------------

inline double ksi_sigma(std::size_t kernel_size) {
  double s = 0.3 * ((double(kernel_size) - 1.0) * 0.5 - 1.0) + 0.8;
  if (s <= 0)
    throw Error(ErrorCode::InvalidK, "kernel_size yields non-positive sigma");
  return s;
}

// Binary adjacency in canonical (label-sorted) node order, zero-padded to
// `size` rows/cols.
inline std::vector<std::vector<double>> canonical_adjacency(
    const LabeledGraph& g, std::size_t size) {
  std::vector<int> order(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) order[i] = int(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return g.labels[a] < g.labels[b];
  });
  std::vector<int> pos(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) pos[order[i]] = int(i);
  std::vector<std::vector<double>> a(size, std::vector<double>(size, 0.0));
  for (const auto& [u, v, t] : g.edges) {
    a[pos[u]][pos[v]] = 1.0;
    a[pos[v]][pos[u]] = 1.0;
  }
  return a;
}

// exp(-||E1 - E2||_F^2 / (2 sigma^2)); 1.0 for identical graphs.
inline double ksi(const LabeledGraph& g1, const LabeledGraph& g2,
                  std::size_t kernel_size) {
  std::size_t n = std::max(g1.size(), g2.size());
  auto a1 = canonical_adjacency(g1, n);
  auto a2 = canonical_adjacency(g2, n);
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double d = a1[i][j] - a2[i][j];
      d2 += d * d;
    }
  double sigma = ksi_sigma(kernel_size);
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

// ---------------------------------------------------------------------------
// Graphlet orbits (connected graphlets on 2-4 nodes, orbits 0-14)
// ---------------------------------------------------------------------------

inline constexpr std::size_t kOrbitCount = 15;

struct OrbitSignature {
  // per-node counts, counts[node][orbit]
  std::vector<std::array<std::int64_t, kOrbitCount>> counts;

  std::size_t nodes() const { return counts.size(); }
};

// Exhaustive enumeration over connected induced subgraphs; orbit assignment
// by degree sequence within the induced subgraph.
inline OrbitSignature orbit_counts(const LabeledGraph& g) {
  std::size_t n = g.size();
  auto adj = g.adjacency();
  OrbitSignature sig;
  sig.counts.assign(n, {});

  // size 2: every edge, orbit 0 (counts to node degree)
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (adj[i][j]) {
        ++sig.counts[i][0];
        ++sig.counts[j][0];
      }

  // size 3
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        int e = int(adj[i][j]) + int(adj[i][k]) + int(adj[j][k]);
        if (e < 2) continue;  // disconnected
        std::array<std::size_t, 3> v{i, j, k};
        if (e == 3) {  // triangle
          for (auto x : v) ++sig.counts[x][3];
        } else {  // path: middle has degree 2
          for (auto x : v) {
            int deg = 0;
            for (auto y : v)
              if (x != y && adj[x][y]) ++deg;
            ++sig.counts[x][deg == 2 ? 2 : 1];
          }
        }
      }

  // size 4
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k)
        for (std::size_t l = k + 1; l < n; ++l) {
          std::array<std::size_t, 4> v{i, j, k, l};
          std::array<int, 4> deg{};
          int e = 0;
          for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b)
              if (adj[v[a]][v[b]]) {
                ++deg[a];
                ++deg[b];
                ++e;
              }
          if (e < 3) continue;
          // connectivity check (a 4-node graph with >= 3 edges can still be
          // a triangle plus an isolated node)
          if (e == 3) {
            bool isolated = false;
            for (int a = 0; a < 4; ++a)
              if (deg[a] == 0) isolated = true;
            if (isolated) continue;
          }
          std::array<int, 4> sorted = deg;
          std::sort(sorted.begin(), sorted.end());
          if (e == 3 && sorted == std::array<int, 4>{1, 1, 2, 2}) {
            for (int a = 0; a < 4; ++a)
              ++sig.counts[v[a]][deg[a] == 1 ? 4 : 5];  // path
          } else if (e == 3 && sorted == std::array<int, 4>{1, 1, 1, 3}) {
            for (int a = 0; a < 4; ++a)
              ++sig.counts[v[a]][deg[a] == 1 ? 6 : 7];  // star
          } else if (e == 4 && sorted == std::array<int, 4>{2, 2, 2, 2}) {
            for (int a = 0; a < 4; ++a) ++sig.counts[v[a]][8];  // cycle
          } else if (e == 4 && sorted == std::array<int, 4>{1, 2, 2, 3}) {
            for (int a = 0; a < 4; ++a) {  // tailed triangle
              if (deg[a] == 1) ++sig.counts[v[a]][9];
              else if (deg[a] == 2) ++sig.counts[v[a]][10];
              else ++sig.counts[v[a]][11];
            }
          } else if (e == 5) {
            for (int a = 0; a < 4; ++a)  // diamond
              ++sig.counts[v[a]][deg[a] == 2 ? 12 : 13];
          } else if (e == 6) {
            for (int a = 0; a < 4; ++a) ++sig.counts[v[a]][14];  // K4
          }
        }

  return sig;
}

// Per-orbit count sequences, sorted descending and zero-padded; cosine with
// cos(0,0)=1 and cos(0,x)=0; weighted sum (default uniform 1/15).
inline double orbit_similarity(const LabeledGraph& g1, const LabeledGraph& g2,
                               std::vector<double> weights = {}) {
  if (weights.empty()) weights.assign(kOrbitCount, 1.0 / double(kOrbitCount));
  if (weights.size() != kOrbitCount)
    throw Error(ErrorCode::ShapeError, "need 15 orbit weights");
  OrbitSignature s1 = orbit_counts(g1);
  OrbitSignature s2 = orbit_counts(g2);
  double total = 0.0;
  for (std::size_t orbit = 0; orbit < kOrbitCount; ++orbit) {
    std::vector<double> a, b;
    for (const auto& c : s1.counts) a.push_back(double(c[orbit]));
    for (const auto& c : s2.counts) b.push_back(double(c[orbit]));
    std::sort(a.rbegin(), a.rend());
    std::sort(b.rbegin(), b.rend());
    std::size_t len = std::max(a.size(), b.size());
    a.resize(len, 0.0);
    b.resize(len, 0.0);
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < len; ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    double cosv;
    if (na == 0 && nb == 0) cosv = 1.0;       // identical emptiness
    else if (na == 0 || nb == 0) cosv = 0.0;  // zero vs non-zero
    else cosv = dot / (std::sqrt(na) * std::sqrt(nb));
    total += weights[orbit] * cosv;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Canonical forms
// ---------------------------------------------------------------------------

// Canonical representation of an attribute-labeled graph: label-sorted node
// order with exhaustive permutation over duplicate-label blocks, picking the
// lexicographically smallest edge list. Equal forms <=> labeled isomorphism.
struct CanonicalForm {
  std::vector<std::pair<int, std::string>> labels;    // sorted
  std::vector<std::tuple<int, int, int>> edges;       // canonical, sorted

  bool operator==(const CanonicalForm&) const = default;
  bool operator<(const CanonicalForm& o) const {
    return std::tie(labels, edges) < std::tie(o.labels, o.edges);
  }

  std::string key() const {
    std::string s;
    for (const auto& [t, tok] : labels)
      s += std::to_string(t) + ":" + tok + ";";
    s += "|";
    for (const auto& [u, v, t] : edges)
      s += std::to_string(u) + "," + std::to_string(v) + "," +
           std::to_string(t) + ";";
    return s;
  }
};

namespace detail {

inline void canonical_search(
    const std::vector<std::vector<int>>& blocks, std::size_t block_idx,
    std::vector<int>& pos, const LabeledGraph& g,
    std::vector<std::tuple<int, int, int>>& best, bool& have_best) {
  if (block_idx == blocks.size()) {
    std::vector<std::tuple<int, int, int>> edges;
    edges.reserve(g.edges.size());
    for (const auto& [u, v, t] : g.edges) {
      int a = pos[u], b = pos[v];
      if (a > b) std::swap(a, b);
      edges.emplace_back(a, b, t);
    }
    std::sort(edges.begin(), edges.end());
    if (!have_best || edges < best) {
      best = std::move(edges);
      have_best = true;
    }
    return;
  }
  std::vector<int> block = blocks[block_idx];  // node indices, canonical slots
  std::vector<int> slots(block.size());
  // slots for this block are contiguous, starting at the running offset
  int offset = 0;
  for (std::size_t b = 0; b < block_idx; ++b)
    offset += int(blocks[b].size());
  std::sort(block.begin(), block.end());
  do {
    for (std::size_t i = 0; i < block.size(); ++i) pos[block[i]] = offset + int(i);
    canonical_search(blocks, block_idx + 1, pos, g, best, have_best);
  } while (std::next_permutation(block.begin(), block.end()));
}

}  // namespace detail

inline CanonicalForm canonical_form(const LabeledGraph& g) {
  std::vector<int> order(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) order[i] = int(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (g.labels[a] != g.labels[b]) return g.labels[a] < g.labels[b];
    return a < b;
  });

  CanonicalForm form;
  for (int i : order) form.labels.push_back(g.labels[i]);

  // group duplicate labels into blocks; permutations only matter there
  std::vector<std::vector<int>> blocks;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || g.labels[order[i]] != g.labels[order[i - 1]])
      blocks.emplace_back();
    blocks.back().push_back(order[i]);
  }

  std::vector<int> pos(g.size(), -1);
  std::vector<std::tuple<int, int, int>> best;
  bool have_best = false;
  detail::canonical_search(blocks, 0, pos, g, best, have_best);
  form.edges = std::move(best);
  return form;
}

// ---------------------------------------------------------------------------
// Novel / Unique
// ---------------------------------------------------------------------------

struct NovelUnique {
  double unique_fraction = 0.0;  // |distinct(gen)| / |gen|
  double novel_fraction = 0.0;   // |distinct(gen) outside training| / |distinct(gen)|
  std::size_t distinct = 0;
};

inline NovelUnique novel_unique(const std::vector<LabeledGraph>& generated,
                                const std::vector<LabeledGraph>& training) {
  if (generated.empty())
    throw Error(ErrorCode::EmptyInput, "no generated graphs");
  std::set<CanonicalForm> train_forms;
  for (const auto& g : training) train_forms.insert(canonical_form(g));
  std::set<CanonicalForm> gen_forms;
  for (const auto& g : generated) gen_forms.insert(canonical_form(g));
  std::size_t novel = 0;
  for (const auto& f : gen_forms)
    if (!train_forms.count(f)) ++novel;
  NovelUnique out;
  out.distinct = gen_forms.size();
  out.unique_fraction = double(gen_forms.size()) / double(generated.size());
  out.novel_fraction = double(novel) / double(gen_forms.size());
  return out;
}

}  // namespace bms
