#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>
#include <vector>

namespace nbd {

enum class GraphKind { grid3d, taxi, grid3d_directed, traffic, octagon };

std::string_view to_string(GraphKind k);
GraphKind parse_graph_kind(std::string_view name);
bool is_symmetric(GraphKind k);

/// Directed weighted graph in compressed adjacency form.
class Graph {
 public:
  struct Edge {
    int to;
    double weight;
  };

  Graph() = default;
  explicit Graph(int nodes) : adjacency_(static_cast<std::size_t>(nodes)) {}

  void add_edge(int from, int to, double weight);
  int nodes() const { return static_cast<int>(adjacency_.size()); }
  std::size_t edges() const;
  const std::vector<Edge>& out(int node) const { return adjacency_[static_cast<std::size_t>(node)]; }
  Graph reversed() const;

 private:
  std::vector<std::vector<Edge>> adjacency_;
};

/// Builds the dataset topology with `side` nodes per axis. Weights are
/// drawn from {0.01, ..., 1.00}, or a per-direction Normal around such a
/// mean for traffic and octagon; unit_weights forces every weight to 1.
Graph build_graph(GraphKind kind, int side, bool unit_weights, std::mt19937_64& rng);

/// Node id of grid coordinates (row-major, last axis fastest).
int grid_node(const std::vector<int>& coords, int side);

/// Single-source distances; unreachable nodes are +inf.
std::vector<double> dijkstra(const Graph& g, int source);

/// Exact s-t distance by A*; the heuristic must be admissible.
double astar(const Graph& g, int source, int target, const std::function<double(int)>& heuristic);

}  // namespace nbd
