#pragma once

// Meta-rule application: records -> per-behavior subgraphs -> accumulated
// attribute-space graph, plus DOT / visualization exports.

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bms/core.hpp"
#include "bms/errors.hpp"

namespace bms {

// Declarative mapping from record fields to nodes and field pairs to edges.
// With `clique` set, every pair of present attributes is connected (edge
// type 0); explicit edge specs override the clique.
struct MetaRule {
  std::string name;
  std::vector<std::string> node_fields;                      // field -> node type by position
  std::vector<std::tuple<std::string, std::string, int>> edge_specs;
  bool clique = true;

  int node_type_of(const std::string& field) const {
    for (std::size_t i = 0; i < node_fields.size(); ++i)
      if (node_fields[i] == field) return static_cast<int>(i);
    return -1;
  }

  int edge_type_count() const {
    int mx = 0;  // clique edges use type 0
    for (const auto& [a, b, t] : edge_specs) mx = std::max(mx, t + 1);
    return std::max(1, mx);
  }

  static MetaRule clique_over(std::vector<std::string> fields,
                              std::string name = "clique") {
    MetaRule r;
    r.name = std::move(name);
    r.node_fields = std::move(fields);
    r.clique = true;
    return r;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["nodes"] = node_fields;
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (const auto& [a, b, t] : edge_specs) edges.push_back({a, b, t});
    j["edges"] = std::move(edges);
    j["clique"] = clique;
    return j;
  }

  static MetaRule from_json(const nlohmann::json& j) {
    MetaRule r;
    r.name = j.value("name", "meta-rule");
    r.node_fields = j.at("nodes").get<std::vector<std::string>>();
    r.clique = j.value("clique", false);
    if (j.contains("edges")) {
      for (const auto& e : j.at("edges")) {
        std::string a = e.at(0).get<std::string>();
        std::string b = e.at(1).get<std::string>();
        int t = e.at(2).get<int>();
        if (r.node_type_of(a) < 0 || r.node_type_of(b) < 0)
          throw Error(ErrorCode::RuleError,
                      "edge spec references undeclared field '" + a + "'/'" + b + "'");
        r.edge_specs.emplace_back(std::move(a), std::move(b), t);
      }
    }
    return r;
  }

  static MetaRule load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open meta-rule '" + path + "'");
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

// Interns the record's present attributes and emits the meta-rule's edges.
// Missing fields are skipped (no sentinel node). Bumps occurrence counts.
inline BehaviorSubgraph build_subgraph(const BehaviorRecord& record,
                                       const MetaRule& rule,
                                       AttributeSpace& space) {
  std::map<std::string, NodeId> present;  // field -> node
  for (const auto& field : rule.node_fields) {
    int fid;
    try {
      fid = space.field_index(field);
    } catch (const Error&) {
      throw Error(ErrorCode::RuleError,
                  "meta-rule references unknown field '" + field + "'");
    }
    auto it = record.values.find(field);
    if (it == record.values.end()) continue;
    if (normalize_token(it->second).empty()) continue;
    NodeId id = space.intern(fid, it->second);
    space.add_occurrence(id);
    present[field] = id;
  }

  BehaviorSubgraph sg;
  sg.record_id = record.record_id;
  for (const auto& [f, id] : present) sg.nodes.push_back(id);
  std::sort(sg.nodes.begin(), sg.nodes.end());
  sg.nodes.erase(std::unique(sg.nodes.begin(), sg.nodes.end()), sg.nodes.end());

  std::set<TypedEdge> edges;
  if (rule.clique) {
    for (std::size_t i = 0; i < sg.nodes.size(); ++i)
      for (std::size_t j = i + 1; j < sg.nodes.size(); ++j)
        edges.insert(TypedEdge{sg.nodes[i], sg.nodes[j], 0});
  }
  for (const auto& [fa, fb, etype] : rule.edge_specs) {
    auto a = present.find(fa);
    auto b = present.find(fb);
    if (a == present.end() || b == present.end()) continue;
    NodeId u = a->second, v = b->second;
    if (u == v) continue;  // same-token self edge, skip
    if (u > v) std::swap(u, v);
    edges.insert(TypedEdge{u, v, etype});
  }
  sg.edges.assign(edges.begin(), edges.end());
  return sg;
}

// Edge weight = number of subgraphs containing that pair under the same
// edge type; order of the input is immaterial.
inline HeteroGraph accumulate(const std::vector<BehaviorSubgraph>& subgraphs,
                              const AttributeSpace& space) {
  HeteroGraph g;
  for (const auto& sg : subgraphs) {
    for (NodeId id : sg.nodes) g.ensure_node(id, space.token(id).field_id);
    for (const auto& e : sg.edges) g.add_edge(e.src, e.dst, e.edge_type, 1);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

struct VisNode {
  NodeId id = -1;
  std::string label;
  std::int64_t size = 0;  // occurrence count
  int depth = -1;         // hop distance from the focal behavior, -1 = beyond
};

struct VisPayload {
  std::vector<VisNode> nodes;
  std::vector<std::tuple<NodeId, NodeId, std::int64_t>> edges;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    auto nodes_j = nlohmann::ordered_json::array();
    for (const auto& n : nodes)
      nodes_j.push_back({{"id", n.id}, {"label", n.label},
                         {"size", n.size}, {"depth", n.depth}});
    auto edges_j = nlohmann::ordered_json::array();
    for (const auto& [u, v, w] : edges)
      edges_j.push_back({{"src", u}, {"dst", v}, {"weight", w}});
    j["nodes"] = std::move(nodes_j);
    j["edges"] = std::move(edges_j);
    return j;
  }
};

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

inline void export_dot(const HeteroGraph& graph, const AttributeSpace& space,
                       std::ostream& out) {
  out << "graph bms {\n";
  for (NodeId id : graph.node_ids()) {
    const auto& t = space.token(id);
    out << "  n" << id << " [label=\"" << dot_escape(space.fields()[t.field_id])
        << "=" << dot_escape(t.value_token) << "\"];\n";
  }
  for (const auto& [e, w] : graph.edges()) {
    out << "  n" << e.src << " -- n" << e.dst << " [weight=" << w
        << ", etype=" << e.edge_type << "];\n";
  }
  out << "}\n";
}

inline void export_dot(const HeteroGraph& graph, const AttributeSpace& space,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  export_dot(graph, space, out);
}

inline void export_dot(const VisPayload& payload, std::ostream& out) {
  out << "graph bms {\n";
  for (const auto& n : payload.nodes) {
    out << "  n" << n.id << " [label=\"" << dot_escape(n.label)
        << "\", width=" << n.size;
    if (n.depth >= 0) out << ", depth=" << n.depth;
    out << "];\n";
  }
  for (const auto& [u, v, w] : payload.edges)
    out << "  n" << u << " -- n" << v << " [weight=" << w << "];\n";
  out << "}\n";
}

// Depth-colored view around one focal behavior: depth = minimal hop distance
// to any of the focal subgraph's nodes, sizes = global occurrence counts.
inline VisPayload export_vis(const HeteroGraph& graph, const AttributeSpace& space,
                             const BehaviorSubgraph& focal, int depth) {
  std::map<NodeId, int> dist;
  for (NodeId start : focal.nodes) {
    if (!graph.has_node(start)) continue;
    for (const auto& [id, d] : graph.neighbors(start, depth)) {
      auto it = dist.find(id);
      if (it == dist.end() || d < it->second) dist[id] = d;
    }
  }
  VisPayload p;
  for (NodeId id : graph.node_ids()) {
    const auto& t = space.token(id);
    VisNode n;
    n.id = id;
    n.label = space.fields()[t.field_id] + "=" + t.value_token;
    n.size = space.count(id);
    auto it = dist.find(id);
    n.depth = it == dist.end() ? -1 : it->second;
    p.nodes.push_back(std::move(n));
  }
  for (const auto& [e, w] : graph.edges()) p.edges.emplace_back(e.src, e.dst, w);
  return p;
}

}  // namespace bms
