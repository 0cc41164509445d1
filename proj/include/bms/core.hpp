#pragma once

// Shared domain types: attribute spaces, behavior records, heterogeneous
// graphs and per-behavior subgraphs.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "bms/errors.hpp"

namespace bms {

using NodeId = std::int32_t;

inline std::string normalize_token(const std::string& raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out = raw.substr(b, e - b);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct AttributeToken {
  int field_id = -1;
  std::string value_token;

  bool operator==(const AttributeToken&) const = default;
  bool operator<(const AttributeToken& o) const {
    return std::tie(field_id, value_token) < std::tie(o.field_id, o.value_token);
  }
};

// Registry of typed attribute nodes with dense global ids.
class AttributeSpace {
 public:
  AttributeSpace() = default;
  explicit AttributeSpace(std::vector<std::string> fields)
      : fields_(std::move(fields)) {}

  const std::vector<std::string>& fields() const { return fields_; }

  int field_index(const std::string& name) const {
    for (std::size_t i = 0; i < fields_.size(); ++i)
      if (fields_[i] == name) return static_cast<int>(i);
    throw Error(ErrorCode::NotFound, "unknown field '" + name + "'");
  }

  // Returns the id for (field, normalized value), allocating the next dense
  // id on first sight. Counts are not touched; ingestion calls
  // add_occurrence separately.
  NodeId intern(int field_id, const std::string& raw_value) {
    if (field_id < 0 || static_cast<std::size_t>(field_id) >= fields_.size())
      throw Error(ErrorCode::NotFound, "field_id out of range");
    std::string tok = normalize_token(raw_value);
    if (tok.empty())
      throw Error(ErrorCode::MissingValue,
                  "empty value for field '" + fields_[field_id] + "'");
    AttributeToken key{field_id, tok};
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    NodeId id = static_cast<NodeId>(tokens_.size());
    tokens_.push_back(key);
    counts_.push_back(0);
    index_.emplace(std::move(key), id);
    return id;
  }

  std::optional<NodeId> lookup(int field_id, const std::string& raw_value) const {
    std::string tok = normalize_token(raw_value);
    auto it = index_.find(AttributeToken{field_id, tok});
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  void add_occurrence(NodeId id, std::int64_t n = 1) { counts_.at(id) += n; }

  std::size_t size() const { return tokens_.size(); }
  const AttributeToken& token(NodeId id) const { return tokens_.at(id); }
  std::int64_t count(NodeId id) const { return counts_.at(id); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["fields"] = fields_;
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      nodes.push_back({{"id", i},
                       {"field", tokens_[i].field_id},
                       {"token", tokens_[i].value_token},
                       {"count", counts_[i]}});
    }
    j["nodes"] = std::move(nodes);
    return j;
  }

  static AttributeSpace from_json(const nlohmann::json& j) {
    AttributeSpace s(j.at("fields").get<std::vector<std::string>>());
    for (const auto& n : j.at("nodes")) {
      AttributeToken t{n.at("field").get<int>(), n.at("token").get<std::string>()};
      NodeId id = static_cast<NodeId>(s.tokens_.size());
      if (n.at("id").get<NodeId>() != id)
        throw Error(ErrorCode::SchemaMismatch, "non-dense node ids in space JSON");
      s.counts_.push_back(n.at("count").get<std::int64_t>());
      s.index_.emplace(t, id);
      s.tokens_.push_back(std::move(t));
    }
    return s;
  }

  bool operator==(const AttributeSpace& o) const {
    return fields_ == o.fields_ && tokens_ == o.tokens_ && counts_ == o.counts_;
  }

 private:
  struct TokenHash {
    std::size_t operator()(const AttributeToken& t) const {
      return std::hash<std::string>()(t.value_token) * 31u +
             static_cast<std::size_t>(t.field_id);
    }
  };

  std::vector<std::string> fields_;
  std::vector<AttributeToken> tokens_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<AttributeToken, NodeId, TokenHash> index_;
};

struct BehaviorRecord {
  std::string record_id;
  std::map<std::string, std::string> values;  // field name -> raw value
  std::optional<std::string> label;
};

struct TypedEdge {
  NodeId src = -1;
  NodeId dst = -1;
  int edge_type = 0;

  bool operator==(const TypedEdge&) const = default;
  bool operator<(const TypedEdge& o) const {
    return std::tie(src, dst, edge_type) < std::tie(o.src, o.dst, o.edge_type);
  }
};

// Undirected typed multigraph over attribute nodes; edge weights are
// occurrence multiplicities accumulated over behaviors.
class HeteroGraph {
 public:
  void ensure_node(NodeId id, int node_type) {
    if (id < 0) throw Error(ErrorCode::GraphError, "negative node id");
    if (static_cast<std::size_t>(id) >= node_types_.size())
      node_types_.resize(id + 1, -1);
    if (node_types_[id] == -1) node_types_[id] = node_type;
  }

  bool has_node(NodeId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < node_types_.size() &&
           node_types_[id] != -1;
  }

  int node_type(NodeId id) const {
    if (!has_node(id)) throw Error(ErrorCode::NotFound, "unknown node");
    return node_types_[id];
  }

  void add_edge(NodeId u, NodeId v, int edge_type, std::int64_t weight = 1) {
    if (u == v) throw Error(ErrorCode::GraphError, "self-loop rejected");
    if (!has_node(u) || !has_node(v))
      throw Error(ErrorCode::GraphError, "edge endpoint not in graph");
    if (weight < 1) throw Error(ErrorCode::GraphError, "edge weight must be >= 1");
    if (u > v) std::swap(u, v);
    weights_[TypedEdge{u, v, edge_type}] += weight;
  }

  std::int64_t weight(NodeId u, NodeId v, int edge_type) const {
    if (u > v) std::swap(u, v);
    auto it = weights_.find(TypedEdge{u, v, edge_type});
    return it == weights_.end() ? 0 : it->second;
  }

  const std::map<TypedEdge, std::int64_t>& edges() const { return weights_; }

  std::size_t node_capacity() const { return node_types_.size(); }

  std::vector<NodeId> node_ids() const {
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < node_types_.size(); ++i)
      if (node_types_[i] != -1) out.push_back(static_cast<NodeId>(i));
    return out;
  }

  // Neighbors regardless of edge type, each listed once.
  std::vector<NodeId> adjacent(NodeId u) const {
    std::vector<NodeId> out;
    for (const auto& [e, w] : weights_) {
      if (e.src == u) out.push_back(e.dst);
      else if (e.dst == u) out.push_back(e.src);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // BFS hop distances from `start`, truncated at `depth`.
  std::map<NodeId, int> neighbors(NodeId start, int depth) const {
    if (!has_node(start)) throw Error(ErrorCode::NotFound, "unknown start node");
    // adjacency index built once per call; fine at desk scale
    std::unordered_map<NodeId, std::vector<NodeId>> adj;
    for (const auto& [e, w] : weights_) {
      adj[e.src].push_back(e.dst);
      adj[e.dst].push_back(e.src);
    }
    std::map<NodeId, int> dist;
    dist[start] = 0;
    std::deque<NodeId> q{start};
    while (!q.empty()) {
      NodeId u = q.front();
      q.pop_front();
      int d = dist[u];
      if (d == depth) continue;
      auto it = adj.find(u);
      if (it == adj.end()) continue;
      for (NodeId v : it->second) {
        if (!dist.count(v)) {
          dist[v] = d + 1;
          q.push_back(v);
        }
      }
    }
    return dist;
  }

  std::int64_t total_weight() const {
    std::int64_t s = 0;
    for (const auto& [e, w] : weights_) s += w;
    return s;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < node_types_.size(); ++i) {
      if (node_types_[i] == -1) continue;
      nodes.push_back({{"id", i}, {"type", node_types_[i]}});
    }
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (const auto& [e, w] : weights_) {
      edges.push_back({{"src", e.src}, {"dst", e.dst},
                       {"etype", e.edge_type}, {"weight", w}});
    }
    j["nodes"] = std::move(nodes);
    j["edges"] = std::move(edges);
    return j;
  }

  static HeteroGraph from_json(const nlohmann::json& j) {
    HeteroGraph g;
    for (const auto& n : j.at("nodes"))
      g.ensure_node(n.at("id").get<NodeId>(), n.at("type").get<int>());
    for (const auto& e : j.at("edges"))
      g.add_edge(e.at("src").get<NodeId>(), e.at("dst").get<NodeId>(),
                 e.at("etype").get<int>(), e.at("weight").get<std::int64_t>());
    return g;
  }

  bool operator==(const HeteroGraph& o) const {
    if (weights_ != o.weights_) return false;
    return node_ids() == o.node_ids();
  }

 private:
  std::vector<int> node_types_;  // -1 = absent
  std::map<TypedEdge, std::int64_t> weights_;  // src < dst
};

// One behavior concretized under a meta-rule.
struct BehaviorSubgraph {
  std::string record_id;
  std::vector<NodeId> nodes;      // sorted, unique
  std::vector<TypedEdge> edges;   // src < dst, endpoints within `nodes`

  bool has_node(NodeId id) const {
    return std::binary_search(nodes.begin(), nodes.end(), id);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["record_id"] = record_id;
    j["nodes"] = nodes;
    nlohmann::ordered_json edges_j = nlohmann::ordered_json::array();
    for (const auto& e : edges)
      edges_j.push_back({{"src", e.src}, {"dst", e.dst}, {"etype", e.edge_type}});
    j["edges"] = std::move(edges_j);
    return j;
  }

  static BehaviorSubgraph from_json(const nlohmann::json& j) {
    BehaviorSubgraph s;
    s.record_id = j.at("record_id").get<std::string>();
    s.nodes = j.at("nodes").get<std::vector<NodeId>>();
    for (const auto& e : j.at("edges"))
      s.edges.push_back(TypedEdge{e.at("src").get<NodeId>(),
                                  e.at("dst").get<NodeId>(),
                                  e.at("etype").get<int>()});
    return s;
  }
};

}  // namespace bms
