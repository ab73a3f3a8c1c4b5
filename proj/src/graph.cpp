#include "nv/graph.hpp"

#include <algorithm>
#include <string>

#include "nv/errors.hpp"

namespace nv {

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges, std::vector<int> layer_of,
             bool allow_self_loops)
    : num_nodes_(num_nodes), allow_self_loops_(allow_self_loops), layer_of_(std::move(layer_of)) {
  if (num_nodes_ == 0) throw ConfigError("graph: num_nodes must be positive");
  if (layer_of_.empty()) layer_of_.assign(num_nodes_, 0);
  if (layer_of_.size() != num_nodes_)
    throw ConfigError("graph.layer_of: expected " + std::to_string(num_nodes_) + " entries, got " +
                      std::to_string(layer_of_.size()));
  for (std::size_t i = 0; i < num_nodes_; ++i) {
    if (layer_of_[i] < 0)
      throw ConfigError("graph.layer_of[" + std::to_string(i) + "]: must be non-negative");
  }
  num_layers_ = *std::max_element(layer_of_.begin(), layer_of_.end()) + 1;

  for (const auto& [u, v] : edges) {
    if (u >= num_nodes_ || v >= num_nodes_)
      throw ConfigError("graph.edges: edge (" + std::to_string(u) + "," + std::to_string(v) +
                        ") out of range");
    if (u == v && !allow_self_loops_)
      throw ConfigError("graph.edges: self-loop at node " + std::to_string(u) +
                        " but allow_self_loops is false");
    if (layer_of_[u] > layer_of_[v])
      throw ConfigError("graph.edges: edge (" + std::to_string(u) + "," + std::to_string(v) +
                        ") runs against the layer order");
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  out_offsets_.assign(num_nodes_ + 1, 0);
  for (const auto& e : edges_) ++out_offsets_[e.first + 1];
  for (std::size_t i = 0; i < num_nodes_; ++i) out_offsets_[i + 1] += out_offsets_[i];
  out_targets_.resize(edges_.size());
  // edges_ is sorted by (u, v), so targets land already sorted per node.
  for (std::size_t k = 0; k < edges_.size(); ++k) out_targets_[k] = edges_[k].second;

  undirected_.assign(num_nodes_, {});
  for (const auto& [u, v] : edges_) {
    undirected_[u].push_back(v);
    undirected_[v].push_back(u);
  }
  for (auto& adj : undirected_) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
}

Graph Graph::chain(std::size_t n, bool allow_self_loops) {
  std::vector<Edge> edges;
  std::vector<int> layers(n);
  for (std::size_t i = 0; i < n; ++i) {
    layers[i] = static_cast<int>(i);
    if (i + 1 < n) edges.emplace_back(i, i + 1);
  }
  return Graph(n, std::move(edges), std::move(layers), allow_self_loops);
}

void Graph::check_node(NodeId u) const {
  if (u >= num_nodes_)
    throw std::out_of_range("graph: node " + std::to_string(u) + " out of range");
}

int Graph::layer_of(NodeId u) const {
  check_node(u);
  return layer_of_[u];
}

std::span<const NodeId> Graph::neighbors_out(NodeId u) const {
  check_node(u);
  return {out_targets_.data() + out_offsets_[u], out_offsets_[u + 1] - out_offsets_[u]};
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  const auto nb = neighbors_out(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<NodeId> Graph::migration_support(NodeId u) const {
  const auto nb = neighbors_out(u);
  if (nb.empty()) return {u};
  return {nb.begin(), nb.end()};
}

BoolMatrix Graph::adjacency_mask() const {
  BoolMatrix mask = BoolMatrix::Constant(num_nodes_, num_nodes_, false);
  for (const auto& [u, v] : edges_) mask(u, v) = true;
  return mask;
}

BoolMatrix Graph::migration_mask() const {
  BoolMatrix mask = adjacency_mask();
  for (NodeId u = 0; u < num_nodes_; ++u)
    if (is_terminal(u)) mask(u, u) = true;
  return mask;
}

std::vector<NodeId> Graph::synapse_neighborhood(NodeId i, NodeId j, std::size_t radius) const {
  check_node(i);
  check_node(j);
  std::vector<std::size_t> dist(num_nodes_, static_cast<std::size_t>(-1));
  std::vector<NodeId> frontier{i};
  dist[i] = 0;
  if (dist[j] != 0) {
    dist[j] = 0;
    frontier.push_back(j);
  }
  for (std::size_t d = 0; d < radius && !frontier.empty(); ++d) {
    std::vector<NodeId> next;
    for (NodeId u : frontier) {
      for (NodeId v : undirected_[u]) {
        if (dist[v] == static_cast<std::size_t>(-1)) {
          dist[v] = d + 1;
          next.push_back(v);
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<NodeId> out;
  for (NodeId u = 0; u < num_nodes_; ++u)
    if (dist[u] != static_cast<std::size_t>(-1)) out.push_back(u);
  return out;
}

}  // namespace nv
