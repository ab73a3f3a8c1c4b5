#include <doctest.h>

#include "nv/errors.hpp"
#include "nv/graph.hpp"

using namespace nv;

TEST_CASE("chain graph layout") {
  const Graph g = Graph::chain(3);
  CHECK(g.num_nodes() == 3);
  CHECK(g.num_edges() == 2);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 2));
  CHECK_FALSE(g.has_edge(1, 0));
  CHECK(g.layer_of(2) == 2);
  CHECK(g.num_layers() == 3);
  CHECK(g.is_terminal(2));
  CHECK(g.migration_support(2) == std::vector<NodeId>{2});
  CHECK(g.migration_support(0) == std::vector<NodeId>{1});
}

TEST_CASE("every migration row has support") {
  const Graph g(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}}, {0, 1, 1, 2});
  const BoolMatrix m = g.migration_mask();
  for (Eigen::Index i = 0; i < m.rows(); ++i) CHECK(m.row(i).count() >= 1);
  CHECK(g.neighbors_out(0).size() == 2);
  CHECK(g.neighbors_out(0)[0] == 1);
}

TEST_CASE("invalid graphs are rejected") {
  CHECK_THROWS_AS(Graph(0, {}), ConfigError);
  CHECK_THROWS_AS(Graph(2, {{0, 2}}), ConfigError);
  CHECK_THROWS_AS(Graph(2, {{1, 1}}), ConfigError);
  CHECK_NOTHROW(Graph(2, {{1, 1}}, {}, true));
  CHECK_THROWS_AS(Graph(2, {{1, 0}}, {0, 1}), ConfigError);
  CHECK_THROWS_AS(Graph(2, {}, {0}), ConfigError);
  CHECK_THROWS_AS(Graph(2, {}, {0, -1}), ConfigError);
}

TEST_CASE("synapse neighbourhood grows with radius") {
  const Graph g = Graph::chain(6);
  CHECK(g.synapse_neighborhood(2, 3, 0) == std::vector<NodeId>{2, 3});
  CHECK(g.synapse_neighborhood(2, 3, 1) == std::vector<NodeId>{1, 2, 3, 4});
  CHECK(g.synapse_neighborhood(2, 3, 5) == std::vector<NodeId>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("self-loops are edges only when allowed") {
  const Graph g(2, {{0, 0}, {0, 1}}, {}, true);
  CHECK(g.has_edge(0, 0));
  CHECK(g.migration_support(0) == std::vector<NodeId>{0, 1});
  CHECK(g.migration_support(1) == std::vector<NodeId>{1});
}
