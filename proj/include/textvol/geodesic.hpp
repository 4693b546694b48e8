#pragma once

#include <queue>
#include <vector>

#include "textvol/mesh.hpp"

namespace textvol {

// Edge graph of a mesh; lengths are per-frame (posed) quantities.
struct VertexGraph {
  std::vector<std::vector<int>> neighbors;

  explicit VertexGraph(const TriMesh& mesh) : neighbors(vertex_ring_lists(mesh)) {}
};

struct GeodesicNeighbor {
  int vertex;
  double distance;
};

// Dijkstra over mesh edges, truncated at `radius`. Includes the seed at
// distance 0. Distances use the supplied (posed) positions.
inline std::vector<GeodesicNeighbor> geodesic_neighborhood(
    const VertexGraph& graph, const std::vector<Vec3>& pos, int seed, double radius) {
  if (radius <= 0) throw ContractError("geodesic_neighborhood: radius must be positive");
  std::vector<double> dist(pos.size(), kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  dist[seed] = 0.0;
  heap.push({0.0, seed});
  std::vector<GeodesicNeighbor> out;
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    out.push_back({v, d});
    for (int u : graph.neighbors[v]) {
      double nd = d + (pos[v] - pos[u]).norm();
      if (nd <= radius && nd < dist[u]) {
        dist[u] = nd;
        heap.push({nd, u});
      }
    }
  }
  return out;
}

}  // namespace textvol
