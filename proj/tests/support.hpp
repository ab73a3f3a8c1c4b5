#pragma once

#include <cstdint>
#include <vector>

#include "nv/coupled_sim.hpp"
#include "nv/graph.hpp"
#include "nv/network.hpp"
#include "nv/rng.hpp"
#include "nv/vesicle.hpp"

namespace nv::testing {

struct Fixture {
  Graph graph;
  NetworkState net;
  VesicleTypeRegistry registry;
};

// Chain graph with one node per layer, a small network and a registry with
// `num_types` default types.
inline Fixture make_fixture(std::vector<int> widths = {3, 5, 2}, std::uint64_t seed = 11, std::size_t num_types = 1,
                            double release_scale = 0.1) {
  Fixture f;
  f.graph = Graph::chain(widths.size());
  RngStream net_rng(seed, stream_id(Phase::Test, 0, 0));
  f.net = NetworkState::init(widths, 0.0, f.graph.num_nodes(), 2, 4, net_rng);
  RegistrySpec spec;
  spec.content_dim = 3;
  spec.types.assign(num_types, TypeSpec{});
  spec.release_init_scale = release_scale;
  RngStream reg_rng(seed, stream_id(Phase::Test, 0, 1));
  f.registry = VesicleTypeRegistry::build(f.graph, widths, feature_dim(f.net), spec, reg_rng);
  return f;
}

inline Vesicle make_vesicle(VesicleId id, TypeId type, NodeId at, VectorXd content, double lifetime = 3.0) {
  Vesicle v;
  v.id = id;
  v.type = type;
  v.location = at;
  v.content = std::move(content);
  v.lifetime = lifetime;
  return v;
}

}  // namespace nv::testing
