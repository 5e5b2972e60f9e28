#include "nbd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>

namespace nbd {

std::string_view to_string(GraphKind k) {
  switch (k) {
    case GraphKind::grid3d: return "3d";
    case GraphKind::taxi: return "taxi";
    case GraphKind::grid3d_directed: return "3dd";
    case GraphKind::traffic: return "traffic";
    case GraphKind::octagon: return "octagon";
  }
  return "unknown";
}

GraphKind parse_graph_kind(std::string_view name) {
  if (name == "3d") return GraphKind::grid3d;
  if (name == "taxi") return GraphKind::taxi;
  if (name == "3dd") return GraphKind::grid3d_directed;
  if (name == "traffic") return GraphKind::traffic;
  if (name == "octagon") return GraphKind::octagon;
  throw std::invalid_argument("unknown graph dataset '" + std::string(name) + "'");
}

bool is_symmetric(GraphKind k) { return k == GraphKind::grid3d || k == GraphKind::taxi; }

void Graph::add_edge(int from, int to, double weight) {
  if (from < 0 || from >= nodes() || to < 0 || to >= nodes()) throw std::out_of_range("graph: node id out of range");
  if (!(weight > 0.0) || !std::isfinite(weight)) throw std::invalid_argument("graph: edge weights must be positive");
  adjacency_[static_cast<std::size_t>(from)].push_back({to, weight});
}

std::size_t Graph::edges() const {
  std::size_t n = 0;
  for (const auto& a : adjacency_) n += a.size();
  return n;
}

Graph Graph::reversed() const {
  Graph r(nodes());
  for (int u = 0; u < nodes(); ++u) {
    for (const auto& e : out(u)) r.add_edge(e.to, u, e.weight);
  }
  return r;
}

int grid_node(const std::vector<int>& coords, int side) {
  int id = 0;
  for (int c : coords) id = id * side + c;
  return id;
}

namespace {

int ipow(int base, int exp) {
  int r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

std::vector<int> coords_of(int node, int side, int dims) {
  std::vector<int> c(static_cast<std::size_t>(dims));
  for (int k = dims - 1; k >= 0; --k) {
    c[static_cast<std::size_t>(k)] = node % side;
    node /= side;
  }
  return c;
}

class WeightSampler {
 public:
  WeightSampler(bool unit, std::mt19937_64& rng) : unit_(unit), rng_(rng) {}

  // One of {0.01, ..., 1.00}.
  double level() {
    if (unit_) return 1.0;
    return static_cast<double>(pick_(rng_)) / 100.0;
  }

  // Forward and reverse weights around a shared mean.
  std::pair<double, double> directed() {
    if (unit_) return {1.0, 1.0};
    const double mean = level();
    std::normal_distribution<double> n(mean, mean / 4.0);
    return {std::max(0.01, n(rng_)), std::max(0.01, n(rng_))};
  }

 private:
  bool unit_;
  std::mt19937_64& rng_;
  std::uniform_int_distribution<int> pick_{1, 100};
};

}  // namespace

Graph build_graph(GraphKind kind, int side, bool unit_weights, std::mt19937_64& rng) {
  const int dims = kind == GraphKind::taxi ? 4 : (kind == GraphKind::traffic || kind == GraphKind::octagon ? 2 : 3);
  const bool wraps = kind == GraphKind::grid3d || kind == GraphKind::grid3d_directed;
  if (side < (wraps ? 3 : 2)) throw std::invalid_argument("graph: side too small for " + std::string(to_string(kind)));
  const int n = ipow(side, dims);
  Graph g(n);
  WeightSampler w(unit_weights, rng);

  for (int u = 0; u < n; ++u) {
    const auto c = coords_of(u, side, dims);
    for (int axis = 0; axis < dims; ++axis) {
      auto next = c;
      if (wraps) {
        next[static_cast<std::size_t>(axis)] = (c[static_cast<std::size_t>(axis)] + 1) % side;
      } else {
        if (c[static_cast<std::size_t>(axis)] + 1 >= side) continue;
        next[static_cast<std::size_t>(axis)] += 1;
      }
      const int v = grid_node(next, side);
      switch (kind) {
        case GraphKind::grid3d:
        case GraphKind::taxi: {
          const double weight = w.level();
          g.add_edge(u, v, weight);
          g.add_edge(v, u, weight);
          break;
        }
        case GraphKind::grid3d_directed: g.add_edge(u, v, w.level()); break;
        case GraphKind::traffic:
        case GraphKind::octagon: {
          const auto [fwd, rev] = w.directed();
          g.add_edge(u, v, fwd);
          g.add_edge(v, u, rev);
          break;
        }
      }
    }
    if (kind == GraphKind::octagon) {
      // Both diagonals towards the next row.
      for (int dx : {-1, 1}) {
        const int x = c[1] + dx;
        if (c[0] + 1 >= side || x < 0 || x >= side) continue;
        const int v = grid_node({c[0] + 1, x}, side);
        const auto [fwd, rev] = w.directed();
        g.add_edge(u, v, fwd);
        g.add_edge(v, u, rev);
      }
    }
  }
  return g;
}

std::vector<double> dijkstra(const Graph& g, int source) {
  if (source < 0 || source >= g.nodes()) throw std::out_of_range("dijkstra: source out of range");
  std::vector<double> dist(static_cast<std::size_t>(g.nodes()), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[static_cast<std::size_t>(source)] = 0.0;
  queue.push({0.0, source});
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& e : g.out(u)) {
      const double nd = d + e.weight;
      if (nd < dist[static_cast<std::size_t>(e.to)]) {
        dist[static_cast<std::size_t>(e.to)] = nd;
        queue.push({nd, e.to});
      }
    }
  }
  return dist;
}

double astar(const Graph& g, int source, int target, const std::function<double(int)>& heuristic) {
  if (source < 0 || source >= g.nodes() || target < 0 || target >= g.nodes()) {
    throw std::out_of_range("astar: node out of range");
  }
  std::vector<double> best(static_cast<std::size_t>(g.nodes()), std::numeric_limits<double>::infinity());
  std::vector<char> closed(static_cast<std::size_t>(g.nodes()), 0);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  best[static_cast<std::size_t>(source)] = 0.0;
  open.push({heuristic(source), source});
  while (!open.empty()) {
    const int u = open.top().second;
    open.pop();
    if (u == target) return best[static_cast<std::size_t>(u)];
    if (closed[static_cast<std::size_t>(u)]) continue;
    closed[static_cast<std::size_t>(u)] = 1;
    for (const auto& e : g.out(u)) {
      const double nd = best[static_cast<std::size_t>(u)] + e.weight;
      if (nd < best[static_cast<std::size_t>(e.to)]) {
        best[static_cast<std::size_t>(e.to)] = nd;
        open.push({nd + heuristic(e.to), e.to});
      }
    }
  }
  throw std::runtime_error("astar: target unreachable from source");
}

}  // namespace nbd
