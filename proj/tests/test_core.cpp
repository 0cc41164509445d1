#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "bms/core.hpp"
#include "bms/numerics.hpp"

using namespace bms;

TEST_CASE("token normalization trims and lowercases") {
  CHECK(normalize_token("  F ") == "f");
  CHECK(normalize_token("F") == "f");
  CHECK(normalize_token("f") == "f");
  CHECK(normalize_token("\tMixed Case\n") == "mixed case");
  CHECK(normalize_token("   ") == "");
}

TEST_CASE("intern is idempotent and allocates dense ids") {
  AttributeSpace s({"a", "b"});
  NodeId x = s.intern(0, "red");
  NodeId y = s.intern(0, "blue");
  NodeId z = s.intern(1, "red");  // same token, different field -> new node
  CHECK(x == 0);
  CHECK(y == 1);
  CHECK(z == 2);
  CHECK(s.intern(0, "red") == x);
  CHECK(s.intern(0, " RED ") == x);  // normalization collapses
  CHECK(s.size() == 3);
  CHECK(s.token(x).field_id == 0);
  CHECK(s.token(x).value_token == "red");
}

TEST_CASE("intern rejects empty values and bad fields") {
  AttributeSpace s({"a"});
  CHECK_THROWS_AS(s.intern(0, "   "), Error);
  try {
    s.intern(0, "");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingValue);
  }
  CHECK_THROWS_AS(s.intern(5, "x"), Error);
  CHECK_THROWS_AS(s.field_index("nope"), Error);
  CHECK(s.field_index("a") == 0);
}

TEST_CASE("lookup finds interned tokens without allocating") {
  AttributeSpace s({"a"});
  NodeId x = s.intern(0, "v");
  CHECK(s.lookup(0, "V") == x);
  CHECK(!s.lookup(0, "other").has_value());
  CHECK(s.size() == 1);
}

TEST_CASE("occurrence counts accumulate") {
  AttributeSpace s({"a"});
  NodeId x = s.intern(0, "v");
  CHECK(s.count(x) == 0);
  s.add_occurrence(x);
  s.add_occurrence(x, 4);
  CHECK(s.count(x) == 5);
}

TEST_CASE("attribute space JSON round trip is exact") {
  AttributeSpace s({"f1", "f2"});
  s.add_occurrence(s.intern(0, "x"), 3);
  s.add_occurrence(s.intern(1, "y"), 1);
  s.intern(0, "z");
  auto j = s.to_json();
  AttributeSpace back = AttributeSpace::from_json(j);
  CHECK(back == s);
  // re-serialization is bit-identical
  CHECK(back.to_json().dump() == j.dump());
}

TEST_CASE("space from_json rejects non-dense ids") {
  nlohmann::json j = {
      {"fields", {"a"}},
      {"nodes", {{{"id", 1}, {"field", 0}, {"token", "x"}, {"count", 0}}}}};
  CHECK_THROWS_AS(AttributeSpace::from_json(j), Error);
}

TEST_CASE("hetero graph rejects self-loops, dangling edges and zero weights") {
  HeteroGraph g;
  g.ensure_node(0, 0);
  g.ensure_node(1, 1);
  CHECK_THROWS_AS(g.add_edge(0, 0, 0), Error);
  try {
    g.add_edge(0, 0, 0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GraphError);
  }
  CHECK_THROWS_AS(g.add_edge(0, 7, 0), Error);
  CHECK_THROWS_AS(g.add_edge(0, 1, 0, 0), Error);
  CHECK_THROWS_AS(g.add_edge(0, 1, 0, -2), Error);
}

TEST_CASE("edge weights accumulate and are order-symmetric") {
  HeteroGraph g;
  g.ensure_node(0, 0);
  g.ensure_node(1, 0);
  g.add_edge(0, 1, 0);
  g.add_edge(1, 0, 0, 2);  // reversed endpoints hit the same undirected edge
  CHECK(g.weight(0, 1, 0) == 3);
  CHECK(g.weight(1, 0, 0) == 3);
  CHECK(g.weight(0, 1, 1) == 0);  // different type is a different edge
  g.add_edge(0, 1, 1);
  CHECK(g.total_weight() == 4);
}

TEST_CASE("node types stick at first declaration") {
  HeteroGraph g;
  g.ensure_node(2, 7);
  g.ensure_node(2, 9);  // ignored
  CHECK(g.node_type(2) == 7);
  CHECK(!g.has_node(1));
  CHECK_THROWS_AS(g.node_type(1), Error);
  CHECK(g.node_ids() == std::vector<NodeId>{2});
}

TEST_CASE("BFS neighbors: path graph depth truncation") {
  HeteroGraph g;
  for (NodeId i = 0; i < 3; ++i) g.ensure_node(i, 0);
  g.add_edge(0, 1, 0);
  g.add_edge(1, 2, 0);
  auto d2 = g.neighbors(0, 2);
  CHECK(d2.size() == 3);
  CHECK(d2.at(0) == 0);
  CHECK(d2.at(1) == 1);
  CHECK(d2.at(2) == 2);
  auto d1 = g.neighbors(0, 1);
  CHECK(d1.size() == 2);
  CHECK(d1.count(2) == 0);
}

TEST_CASE("BFS neighbors: isolated node and triangle") {
  HeteroGraph g;
  g.ensure_node(0, 0);
  auto d = g.neighbors(0, 3);
  CHECK(d.size() == 1);
  CHECK(d.at(0) == 0);

  HeteroGraph t;
  for (NodeId i = 0; i < 3; ++i) t.ensure_node(i, 0);
  t.add_edge(0, 1, 0);
  t.add_edge(1, 2, 0);
  t.add_edge(0, 2, 0);
  auto dt = t.neighbors(0, 1);
  CHECK(dt.size() == 3);
  CHECK(dt.at(1) == 1);
  CHECK(dt.at(2) == 1);
  CHECK_THROWS_AS(t.neighbors(9, 1), Error);
}

TEST_CASE("BFS distances obey the triangle inequality (property)") {
  DetRng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    HeteroGraph g;
    int n = 4 + int(rng.next_below(6));
    for (NodeId i = 0; i < n; ++i) g.ensure_node(i, 0);
    for (NodeId i = 0; i < n; ++i)
      for (NodeId j = i + 1; j < n; ++j)
        if (rng.uniform() < 0.35) g.add_edge(i, j, 0);
    for (NodeId s = 0; s < n; ++s) {
      auto ds = g.neighbors(s, n);
      for (const auto& [u, du] : ds) {
        auto dufull = g.neighbors(u, n);
        for (const auto& [v, duv] : dufull) {
          auto it = ds.find(v);
          REQUIRE(it != ds.end());  // reachable via u
          CHECK(it->second <= du + duv);
        }
      }
    }
  }
}

TEST_CASE("hetero graph JSON round trip compares equal") {
  HeteroGraph g;
  for (NodeId i = 0; i < 4; ++i) g.ensure_node(i, i % 2);
  g.add_edge(0, 1, 0, 2);
  g.add_edge(2, 3, 1);
  HeteroGraph back = HeteroGraph::from_json(g.to_json());
  CHECK(back == g);
  CHECK(back.to_json().dump() == g.to_json().dump());
}

TEST_CASE("behavior subgraph JSON round trip") {
  BehaviorSubgraph sg;
  sg.record_id = "r1";
  sg.nodes = {1, 4, 7};
  sg.edges = {TypedEdge{1, 4, 0}, TypedEdge{4, 7, 2}};
  BehaviorSubgraph back = BehaviorSubgraph::from_json(sg.to_json());
  CHECK(back.record_id == sg.record_id);
  CHECK(back.nodes == sg.nodes);
  CHECK(back.edges == sg.edges);
  CHECK(sg.has_node(4));
  CHECK(!sg.has_node(2));
}
