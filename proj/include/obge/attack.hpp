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
#include <functional>
#include <limits>
#include <optional>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "obge/ahu.hpp"
#include "obge/gkt.hpp"

namespace obge {

using VertexPair = std::pair<Vertex, Vertex>;
using CandidateSet = std::vector<VertexPair>;  // sorted, unique

namespace detail {

struct TreeFacts {
  std::vector<std::uint32_t> size, height;
  std::vector<std::vector<std::uint32_t>> by_depth;

  explicit TreeFacts(const RootedTree& t) : size(t.subtree_sizes()), height(t.heights()) {
    for (std::uint32_t n = 0; n < t.size(); ++n) {
      if (t.depth(n) >= by_depth.size()) by_depth.resize(t.depth(n) + 1);
      by_depth[t.depth(n)].push_back(n);
    }
  }
};

// Rooted, parent-preserving, injective embeddings of an observed tree into a
// shortest-path tree. can(o, t): subtree at o fits into subtree at t.
class Embedder {
 public:
  Embedder(const RootedTree& obs, const TreeFacts& of, const RootedTree& sp, const TreeFacts& sf)
      : o_(obs), of_(of), t_(sp), tf_(sf), memo_(obs.size() * sp.size(), -1) {}

  bool can(std::uint32_t o, std::uint32_t t) {
    if (of_.size[o] > tf_.size[t] || of_.height[o] > tf_.height[t]) return false;
    auto& m = memo_[static_cast<std::size_t>(o) * t_.size() + t];
    if (m < 0) m = match(o_.children(o), t_.children(t), RootedTree::kNoNode, RootedTree::kNoNode);
    return m == 1;
  }

  // Maps observed node x to sp node y (same depth) with the ancestor chains
  // forced onto each other, the rest of the observed tree placed freely.
  bool can_pin(std::uint32_t x, std::uint32_t y) {
    if (!can(x, y)) return false;
    while (x != 0) {
      const auto px = o_.parent(x), py = t_.parent(y);
      if (!match(o_.children(px), t_.children(py), x, y)) return false;
      x = px;
      y = py;
    }
    return true;
  }

 private:
  // Every left child (except skip_l) gets a distinct right child (except
  // skip_r) it embeds into. Kuhn's augmenting paths.
  bool match(const std::vector<std::uint32_t>& left, const std::vector<std::uint32_t>& right,
             std::uint32_t skip_l, std::uint32_t skip_r) {
    std::vector<std::uint32_t> l, r;
    for (auto c : left) if (c != skip_l) l.push_back(c);
    for (auto c : right) if (c != skip_r) r.push_back(c);
    if (l.size() > r.size()) return false;
    std::vector<std::vector<std::uint32_t>> adj(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) {
      for (std::uint32_t j = 0; j < r.size(); ++j) {
        if (can(l[i], r[j])) adj[i].push_back(j);
      }
      if (adj[i].empty()) return false;
    }
    std::vector<int> owner(r.size(), -1);
    std::vector<char> seen;
    std::function<bool(std::size_t)> augment = [&](std::size_t i) {
      for (auto j : adj[i]) {
        if (seen[j]) continue;
        seen[j] = 1;
        if (owner[j] < 0 || augment(static_cast<std::size_t>(owner[j]))) {
          owner[j] = static_cast<int>(i);
          return true;
        }
      }
      return false;
    };
    for (std::size_t i = 0; i < l.size(); ++i) {
      seen.assign(r.size(), 0);
      if (!augment(i)) return false;
    }
    return true;
  }

  const RootedTree& o_;
  const TreeFacts& of_;
  const RootedTree& t_;
  const TreeFacts& tf_;
  std::vector<std::int8_t> memo_;
};

}  // namespace detail

// Query recovery against the token leakage of GktScheme. The attacker knows
// the graph. Offline: one shortest-path tree per destination with its
// canonical label. Online: the observed token sequences are glued into a
// forest (all queries to one destination end at the same miss token, and
// shared suffixes reveal path intersections); each observed tree is matched
// against the destination trees it can embed into.
class QueryRecovery {
 public:
  explicit QueryRecovery(const Graph& g) {
    const auto m = compute_sp_matrix(g);
    trees_ = build_sp_trees(m);
    n_ = static_cast<Vertex>(g.vertex_count());
    for (const auto& t : trees_) {
      facts_.emplace_back(t.tree);
      labels_.push_back(ahu_label(t.tree));
    }
    for (Vertex u = 0; u < n_; ++u) {
      for (Vertex v = 0; v < n_; ++v) {
        if (u == v || m.at(u, v) == kNoVertex) trivial_.emplace_back(u, v);
      }
    }
    for (const auto& t : trees_) {
      for (std::uint32_t node = 0; node < t.tree.size(); ++node) {
        ++signature_count_[{t.tree.depth(node), labels_[t.dest]}];
      }
    }
  }

  const std::vector<SpTree>& trees() const { return trees_; }
  const std::string& label(Vertex dest) const { return labels_.at(dest); }

  // Offline grouping key of a query: (hops on its path, label of the tree
  // of its destination). nullopt for pairs with no path or u == v.
  std::optional<std::pair<std::uint32_t, std::string>> signature(Vertex u, Vertex v) const {
    const auto& t = trees_.at(v);
    for (std::uint32_t node = 1; node < t.tree.size(); ++node) {
      if (t.vertex[node] == u) return std::pair{t.tree.depth(node), labels_[v]};
    }
    return std::nullopt;
  }

  bool unique_signature(Vertex u, Vertex v) const {
    auto s = signature(u, v);
    return s && signature_count_.at(*s) == 1;
  }

  // Candidate pairs for each observed sequence.
  std::vector<CandidateSet> recover(const std::vector<TokenSequence>& observed) const {
    std::unordered_map<Token, std::uint32_t, TokenHash> id;
    std::vector<std::uint32_t> parent;
    auto node = [&](const Token& t) {
      auto [it, fresh] = id.emplace(t, static_cast<std::uint32_t>(parent.size()));
      if (fresh) parent.push_back(RootedTree::kNoNode);
      return it->second;
    };
    std::vector<std::uint32_t> start;
    for (const auto& seq : observed) {
      if (seq.empty()) throw ValidationError("empty token sequence");
      std::uint32_t prev = node(seq[0]);
      start.push_back(prev);
      for (std::size_t i = 1; i < seq.size(); ++i) {
        auto cur = node(seq[i]);
        if (parent[prev] != RootedTree::kNoNode && parent[prev] != cur) {
          throw ValidationError("token sequences disagree on a next hop");
        }
        parent[prev] = cur;
        prev = cur;
      }
    }

    // Components, each as a RootedTree; local[global] = node in its tree.
    const auto total = parent.size();
    std::vector<std::uint32_t> root_of(total), local(total);
    for (std::uint32_t x = 0; x < total; ++x) {
      auto r = x;
      for (std::size_t steps = 0; parent[r] != RootedTree::kNoNode; ++steps) {
        if (steps > total) throw ValidationError("token sequences form a cycle");
        r = parent[r];
      }
      root_of[x] = r;
    }
    std::vector<std::vector<std::uint32_t>> kids(total);
    for (std::uint32_t x = 0; x < total; ++x) {
      if (parent[x] != RootedTree::kNoNode) kids[parent[x]].push_back(x);
    }
    std::map<std::uint32_t, RootedTree> forest;
    for (std::uint32_t x = 0; x < total; ++x) {
      if (root_of[x] != x) continue;
      RootedTree t;
      local[x] = 0;
      std::vector<std::uint32_t> order{x};
      for (std::size_t i = 0; i < order.size(); ++i) {
        for (auto c : kids[order[i]]) {
          local[c] = t.add_child(local[order[i]]);
          order.push_back(c);
        }
      }
      forest.emplace(x, std::move(t));
    }

    std::map<std::uint32_t, CandidateSet> by_start;
    for (auto s : start) by_start.emplace(s, CandidateSet{});

    // Destinations each multi-node cluster can embed into as a whole.
    std::vector<std::uint32_t> clusters;
    std::vector<std::vector<Vertex>> feasible;
    std::map<std::uint32_t, detail::TreeFacts> cluster_facts;
    for (const auto& [root, obs] : forest) {
      if (obs.size() == 1) continue;
      const auto& of = cluster_facts.emplace(root, detail::TreeFacts(obs)).first->second;
      const auto obs_label = ahu_label(obs);
      std::vector<Vertex> dests;
      for (const auto& sp : trees_) {
        const auto& sf = facts_[sp.dest];
        if (sf.size[0] < obs.size() || sf.height[0] < of.height[0]) continue;
        if (sf.size[0] == obs.size() && labels_[sp.dest] != obs_label) continue;
        if (detail::Embedder(obs, of, sp.tree, sf).can(0, 0)) dests.push_back(sp.dest);
      }
      clusters.push_back(root);
      feasible.push_back(std::move(dests));
    }
    // Distinct clusters end at distinct miss tokens, hence distinct destinations.
    prune_by_matching(feasible);

    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const auto root = clusters[c];
      const auto& obs = forest.at(root);
      const auto& of = cluster_facts.at(root);
      std::vector<std::uint32_t> starts;
      for (const auto& [s, _] : by_start) {
        if (root_of[s] == root) starts.push_back(s);
      }
      for (auto dest : feasible[c]) {
        const auto& sp = trees_[dest];
        const auto& sf = facts_[dest];
        detail::Embedder emb(obs, of, sp.tree, sf);
        for (auto s : starts) {
          const auto x = local[s];
          for (auto y : sf.by_depth[obs.depth(x)]) {
            if (emb.can_pin(x, y)) by_start[s].emplace_back(sp.vertex[y], sp.dest);
          }
        }
      }
    }
    for (const auto& [root, obs] : forest) {
      if (obs.size() == 1 && by_start.count(root)) by_start[root] = trivial_;
    }
    std::vector<CandidateSet> out;
    out.reserve(observed.size());
    for (auto s : start) {
      auto c = by_start[s];
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
      out.push_back(std::move(c));
    }
    return out;
  }

 private:
  // Keeps destination d for cluster c only if some matching that assigns
  // every cluster a distinct destination uses (c, d). Leaves the sets alone
  // if no such matching exists.
  void prune_by_matching(std::vector<std::vector<Vertex>>& feasible) const {
    const auto k = feasible.size();
    constexpr std::uint32_t kFree = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> owner(n_, kFree), mate(k, kFree);
    std::vector<char> seen;
    std::function<bool(std::size_t)> augment = [&](std::size_t c) {
      for (auto d : feasible[c]) {
        if (seen[d]) continue;
        seen[d] = 1;
        if (owner[d] == kFree || augment(owner[d])) {
          owner[d] = static_cast<std::uint32_t>(c);
          mate[c] = d;
          return true;
        }
      }
      return false;
    };
    for (std::size_t c = 0; c < k; ++c) {
      seen.assign(n_, 0);
      if (!augment(c)) return;
    }
    // (c, d) is usable iff from d an alternating path reaches a free
    // destination or c's own mate.
    std::function<bool(Vertex, Vertex)> reaches = [&](Vertex d, Vertex target) {
      if (d == target || owner[d] == kFree) return true;
      seen[d] = 1;
      for (auto next : feasible[owner[d]]) {
        if (!seen[next] && reaches(next, target)) return true;
      }
      return false;
    };
    std::vector<std::vector<Vertex>> kept(k);
    for (std::size_t c = 0; c < k; ++c) {
      for (auto d : feasible[c]) {
        seen.assign(n_, 0);
        if (d == mate[c] || reaches(d, mate[c])) kept[c].push_back(d);
      }
    }
    feasible = std::move(kept);
  }

  Vertex n_ = 0;
  std::vector<SpTree> trees_;
  std::vector<detail::TreeFacts> facts_;
  std::vector<std::string> labels_;
  CandidateSet trivial_;  // u == v or no path: a single miss token
  std::map<std::pair<std::uint32_t, std::string>, std::size_t> signature_count_;
};

inline std::vector<CandidateSet> query_recovery(const Graph& g,
                                                const std::vector<TokenSequence>& observed) {
  return QueryRecovery(g).recover(observed);
}

// What the OBGE server can do: count rounds (|p| + 1) and guess uniformly
// among all queries with that many rounds.
class LengthAttacker {
 public:
  explicit LengthAttacker(const Graph& g) {
    const auto m = compute_sp_matrix(g);
    const auto n = static_cast<Vertex>(g.vertex_count());
    for (Vertex u = 0; u < n; ++u) {
      for (Vertex v = 0; v < n; ++v) classes_[rounds_for(m, u, v)].emplace_back(u, v);
    }
  }

  static std::size_t rounds_for(const SpMatrix& m, Vertex u, Vertex v) {
    auto p = m.path(u, v);
    return p && !p->empty() ? p->size() : 1;
  }

  const CandidateSet& candidates(std::size_t rounds) const {
    static const CandidateSet kEmpty;
    auto it = classes_.find(rounds);
    return it == classes_.end() ? kEmpty : it->second;
  }

  std::optional<VertexPair> guess(std::size_t rounds, Drbg& rng) const {
    const auto& c = candidates(rounds);
    if (c.empty()) return std::nullopt;
    return c[rng.uniform(c.size())];
  }

  const std::map<std::size_t, CandidateSet>& classes() const { return classes_; }

 private:
  std::map<std::size_t, CandidateSet> classes_;
};

}  // namespace obge
