/*
 *  Copyright 2026 The OBGE Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "obge/error.hpp"

// Plaintext graphs, all-pairs next-hop tables and the independent
// shortest-path oracle.
//
// Shortest means minimum (total weight, hop count). Among equally short
// paths the one whose vertex sequence is lexicographically smallest wins,
// which is the same as picking the smallest next hop at every step.
namespace obge {

using Vertex = std::uint32_t;
inline constexpr Vertex kNoVertex = std::numeric_limits<Vertex>::max();

using PlainPath = std::vector<Vertex>;

struct Arc {
  Vertex to;
  double weight;
};

class Graph {
 public:
  Graph() = default;
  Graph(std::size_t vertex_count, bool directed)
      : directed_(directed), out_(vertex_count) {}

  std::size_t vertex_count() const { return out_.size(); }
  bool directed() const { return directed_; }
  bool weighted() const { return weighted_; }

  // Logical edges: an undirected edge counts once.
  std::size_t edge_count() const { return directed_ ? arcs_ : arcs_ / 2; }

  // Duplicate edges collapse to the minimum weight.
  void add_edge(Vertex u, Vertex v, double weight = 1.0) {
    check_vertex(u);
    check_vertex(v);
    if (u == v) throw ValidationError("self-loop on vertex " + std::to_string(u));
    if (!std::isfinite(weight) || weight < 0) {
      throw ValidationError("edge weight must be finite and >= 0");
    }
    if (weight != 1.0) weighted_ = true;
    insert_arc(u, v, weight);
    if (!directed_) insert_arc(v, u, weight);
  }

  // Sorted by target id.
  const std::vector<Arc>& out_arcs(Vertex u) const { return out_.at(u); }

  bool has_edge(Vertex u, Vertex v) const {
    const auto& arcs = out_.at(u);
    auto it = std::lower_bound(arcs.begin(), arcs.end(), v,
                               [](const Arc& a, Vertex x) { return a.to < x; });
    return it != arcs.end() && it->to == v;
  }

  void check_vertex(Vertex v) const {
    if (v >= out_.size()) {
      throw RangeError("vertex " + std::to_string(v) + " out of range [0, " +
                       std::to_string(out_.size()) + ")");
    }
  }

 private:
  void insert_arc(Vertex u, Vertex v, double weight) {
    auto& arcs = out_[u];
    auto it = std::lower_bound(arcs.begin(), arcs.end(), v,
                               [](const Arc& a, Vertex x) { return a.to < x; });
    if (it != arcs.end() && it->to == v) {
      it->weight = std::min(it->weight, weight);
      return;
    }
    arcs.insert(it, Arc{v, weight});
    ++arcs_;
  }

  bool directed_ = true;
  bool weighted_ = false;
  std::size_t arcs_ = 0;
  std::vector<std::vector<Arc>> out_;
};

// Edge list: `u<TAB>v[<TAB>weight]` per line (any whitespace accepted),
// blank lines and `#` comments skipped, optional `#vertices N` header.
inline Graph load_graph(std::istream& in, bool directed) {
  struct Raw {
    Vertex u, v;
    double w;
  };
  std::vector<Raw> edges;
  std::optional<std::size_t> declared;
  std::size_t max_id_plus_one = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      std::istringstream hs(line.substr(first + 1));
      std::string key;
      long long n = -1;
      if (hs >> key && key == "vertices") {
        if (!(hs >> n) || n < 0) throw ParseError(lineno, "bad #vertices header");
        declared = static_cast<std::size_t>(n);
      }
      continue;
    }
    std::istringstream ls(line);
    long long u = -1, v = -1;
    if (!(ls >> u >> v) || u < 0 || v < 0 || u >= kNoVertex || v >= kNoVertex) {
      throw ParseError(lineno, "expected two non-negative vertex ids");
    }
    double w = 1.0;
    std::string rest;
    if (ls >> rest) {
      std::size_t used = 0;
      try {
        w = std::stod(rest, &used);
      } catch (const std::exception&) {
        throw ParseError(lineno, "bad weight '" + rest + "'");
      }
      if (used != rest.size()) throw ParseError(lineno, "bad weight '" + rest + "'");
      if (ls >> rest) throw ParseError(lineno, "trailing fields");
    }
    if (u == v) {
      throw ValidationError("line " + std::to_string(lineno) + ": self-loop on vertex " +
                            std::to_string(u));
    }
    if (!std::isfinite(w) || w < 0) {
      throw ValidationError("line " + std::to_string(lineno) + ": weight must be finite and >= 0");
    }
    edges.push_back({static_cast<Vertex>(u), static_cast<Vertex>(v), w});
    max_id_plus_one = std::max<std::size_t>(max_id_plus_one, std::max(u, v) + 1);
  }
  std::size_t n = max_id_plus_one;
  if (declared) {
    if (*declared < max_id_plus_one) {
      throw ParseError(0, "#vertices header smaller than largest vertex id");
    }
    n = *declared;
  }
  Graph g(n, directed);
  for (const auto& e : edges) g.add_edge(e.u, e.v, e.w);
  return g;
}

// Path cost ordered by weight first, then hop count.
struct PathCost {
  double weight = 0;
  std::uint32_t hops = 0;

  auto operator<=>(const PathCost&) const = default;
  PathCost operator+(const Arc& a) const { return {weight + a.weight, hops + 1}; }

  static PathCost infinite() {
    return {std::numeric_limits<double>::infinity(), std::numeric_limits<std::uint32_t>::max()};
  }
  bool finite() const { return std::isfinite(weight); }
};

namespace detail {

inline std::vector<std::vector<Arc>> reverse_arcs(const Graph& g) {
  std::vector<std::vector<Arc>> rev(g.vertex_count());
  for (Vertex u = 0; u < g.vertex_count(); ++u) {
    for (const auto& a : g.out_arcs(u)) rev[a.to].push_back(Arc{u, a.weight});
  }
  return rev;
}

// Cost from every vertex to `dest`.
inline void costs_to(const Graph& g, const std::vector<std::vector<Arc>>& rev, Vertex dest,
                     std::vector<PathCost>& cost) {
  cost.assign(g.vertex_count(), PathCost::infinite());
  cost[dest] = PathCost{};
  if (!g.weighted()) {
    std::vector<Vertex> frontier{dest}, next;
    while (!frontier.empty()) {
      next.clear();
      for (Vertex x : frontier) {
        for (const auto& a : rev[x]) {
          if (!cost[a.to].finite()) {
            cost[a.to] = cost[x] + a;
            next.push_back(a.to);
          }
        }
      }
      frontier.swap(next);
    }
    return;
  }
  using Item = std::pair<PathCost, Vertex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  pq.push({cost[dest], dest});
  while (!pq.empty()) {
    auto [c, x] = pq.top();
    pq.pop();
    if (c != cost[x]) continue;
    for (const auto& a : rev[x]) {
      // a.to -> x with weight a.weight; cost(a.to) = w + cost(x), summed in
      // the same order the next-hop rule re-evaluates below.
      PathCost cand{a.weight + c.weight, c.hops + 1};
      if (cand < cost[a.to]) {
        cost[a.to] = cand;
        pq.push({cand, a.to});
      }
    }
  }
}

// Smallest w adjacent to u that starts a shortest u->dest path.
inline Vertex pick_next_hop(const Graph& g, const std::vector<PathCost>& cost, Vertex u) {
  for (const auto& a : g.out_arcs(u)) {
    if (!cost[a.to].finite()) continue;
    PathCost via{a.weight + cost[a.to].weight, cost[a.to].hops + 1};
    if (via == cost[u]) return a.to;
  }
  return kNoVertex;
}

}  // namespace detail

// |V| x |V| next-hop table; cell (u, v) is the vertex right after u on the
// chosen shortest u->v path, kNoVertex on the diagonal and for unreachable v.
class SpMatrix {
 public:
  SpMatrix() = default;
  explicit SpMatrix(std::size_t n) : n_(n), cells_(n * n, kNoVertex) {}

  std::size_t dimension() const { return n_; }
  Vertex at(Vertex u, Vertex v) const { return cells_.at(index(u, v)); }
  void set(Vertex u, Vertex v, Vertex next) { cells_.at(index(u, v)) = next; }

  // Follows next hops from u; nullopt when v is unreachable, {} when u == v.
  std::optional<PlainPath> path(Vertex u, Vertex v) const {
    if (u == v) return PlainPath{};
    if (at(u, v) == kNoVertex) return std::nullopt;
    PlainPath p{u};
    for (Vertex x = u; x != v;) {
      x = at(x, v);
      if (x == kNoVertex || p.size() > n_) return std::nullopt;
      p.push_back(x);
    }
    return p;
  }

 private:
  std::size_t index(Vertex u, Vertex v) const {
    if (u >= n_ || v >= n_) throw RangeError("sp-matrix index out of range");
    return static_cast<std::size_t>(u) * n_ + v;
  }

  std::size_t n_ = 0;
  std::vector<Vertex> cells_;
};

inline SpMatrix compute_sp_matrix(const Graph& g) {
  const auto n = static_cast<Vertex>(g.vertex_count());
  SpMatrix m(n);
  auto rev = detail::reverse_arcs(g);
  std::vector<PathCost> cost;
  for (Vertex v = 0; v < n; ++v) {
    detail::costs_to(g, rev, v, cost);
    for (Vertex u = 0; u < n; ++u) {
      if (u == v || !cost[u].finite()) continue;
      m.set(u, v, detail::pick_next_hop(g, cost, u));
    }
  }
  return m;
}

// Dictionary form of the next-hop table: (u, v) -> (w, v) for every
// ordered connected pair u != v. Entries are kept sorted by (u, v).
class Spdx {
 public:
  struct Entry {
    Vertex u, v, next;
  };

  Spdx() = default;
  explicit Spdx(std::vector<Entry> entries) : entries_(std::move(entries)) {}

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Value (w, v) for label (u, v).
  std::optional<std::pair<Vertex, Vertex>> find(Vertex u, Vertex v) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{u, v},
                               [](const Entry& e, std::pair<Vertex, Vertex> k) {
                                 return std::pair{e.u, e.v} < k;
                               });
    if (it == entries_.end() || it->u != u || it->v != v) return std::nullopt;
    return std::pair{it->next, it->v};
  }

 private:
  std::vector<Entry> entries_;
};

inline Spdx compute_spdx(const SpMatrix& m) {
  std::vector<Spdx::Entry> entries;
  const auto n = static_cast<Vertex>(m.dimension());
  for (Vertex u = 0; u < n; ++u) {
    for (Vertex v = 0; v < n; ++v) {
      if (auto w = m.at(u, v); w != kNoVertex) entries.push_back({u, v, w});
    }
  }
  return Spdx(std::move(entries));
}

inline Spdx compute_spdx(const Graph& g) { return compute_spdx(compute_sp_matrix(g)); }

// Shortest paths from `source` to every vertex, computed forward with full
// path labels (no next-hop table involved). Entry v is nullopt when v is
// unreachable and the empty path for v == source.
inline std::vector<std::optional<PlainPath>> spath_oracle_from(const Graph& g, Vertex source) {
  g.check_vertex(source);
  const auto n = g.vertex_count();
  struct Label {
    PathCost cost = PathCost::infinite();
    PlainPath path;
    bool operator<(const Label& o) const {
      if (cost != o.cost) return cost < o.cost;
      return path < o.path;
    }
  };
  std::vector<Label> best(n);
  std::vector<bool> done(n, false);
  best[source] = Label{PathCost{}, PlainPath{source}};
  using Item = std::pair<Label, Vertex>;
  auto cmp = [](const Item& a, const Item& b) { return b.first < a.first; };
  std::priority_queue<Item, std::vector<Item>, decltype(cmp)> pq(cmp);
  pq.push({best[source], source});
  while (!pq.empty()) {
    auto [label, x] = pq.top();
    pq.pop();
    if (done[x]) continue;
    done[x] = true;
    for (const auto& a : g.out_arcs(x)) {
      if (done[a.to]) continue;
      Label cand{label.cost + a, label.path};
      cand.path.push_back(a.to);
      if (cand < best[a.to]) {
        best[a.to] = cand;
        pq.push({std::move(cand), a.to});
      }
    }
  }
  std::vector<std::optional<PlainPath>> out(n);
  for (Vertex v = 0; v < n; ++v) {
    if (v == source) {
      out[v] = PlainPath{};
    } else if (done[v]) {
      out[v] = std::move(best[v].path);
    }
  }
  return out;
}

inline std::optional<PlainPath> spath_oracle(const Graph& g, Vertex u, Vertex v) {
  g.check_vertex(v);
  return spath_oracle_from(g, u)[v];
}

}  // namespace obge
