#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace nv {

using NodeId = std::size_t;
using Edge = std::pair<NodeId, NodeId>;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Immutable directed graph G = (V, E) shared by the base network and the
// vesicle population. Out-neighbour lists are sorted ascending so every
// iteration over them is deterministic.
class Graph {
 public:
  Graph() = default;
  // `layer_of` may be empty (all nodes in layer 0). Throws ConfigError on
  // out-of-range endpoints, disallowed self-loops, or edges that run
  // backwards through the layer order.
  Graph(std::size_t num_nodes, std::vector<Edge> edges, std::vector<int> layer_of = {},
        bool allow_self_loops = false);

  // 0 -> 1 -> ... -> n-1 with layer_of[i] = i.
  static Graph chain(std::size_t n, bool allow_self_loops = false);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  bool allow_self_loops() const noexcept { return allow_self_loops_; }

  int layer_of(NodeId u) const;
  const std::vector<int>& layers() const noexcept { return layer_of_; }
  int num_layers() const noexcept { return num_layers_; }

  std::span<const NodeId> neighbors_out(NodeId u) const;
  bool has_edge(NodeId u, NodeId v) const;
  bool is_terminal(NodeId u) const { return neighbors_out(u).empty(); }

  // Out-neighbours, or {u} for a terminal node (implicit self-loop used
  // only for migration; it is not part of E).
  std::vector<NodeId> migration_support(NodeId u) const;
  BoolMatrix migration_mask() const;

  BoolMatrix adjacency_mask() const;

  // {i, j} plus every node within `radius` undirected hops of i or j,
  // sorted ascending.
  std::vector<NodeId> synapse_neighborhood(NodeId i, NodeId j, std::size_t radius) const;

 private:
  void check_node(NodeId u) const;

  std::size_t num_nodes_ = 0;
  bool allow_self_loops_ = false;
  std::vector<Edge> edges_;
  std::vector<int> layer_of_;
  int num_layers_ = 1;
  std::vector<std::size_t> out_offsets_{0};
  std::vector<NodeId> out_targets_;
  std::vector<std::vector<NodeId>> undirected_;
};

}  // namespace nv
