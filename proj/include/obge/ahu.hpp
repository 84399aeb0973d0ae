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
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "obge/graph.hpp"

namespace obge {

// Rooted tree over dense node ids; node 0 is the root.
class RootedTree {
 public:
  static constexpr std::uint32_t kNoNode = std::numeric_limits<std::uint32_t>::max();

  RootedTree() : parent_{kNoNode}, children_(1), depth_{0} {}

  std::uint32_t add_child(std::uint32_t parent) {
    if (parent >= size()) throw RangeError("parent node out of range");
    const auto id = static_cast<std::uint32_t>(size());
    parent_.push_back(parent);
    children_.emplace_back();
    depth_.push_back(depth_[parent] + 1);
    children_[parent].push_back(id);
    return id;
  }

  std::size_t size() const { return parent_.size(); }
  std::uint32_t parent(std::uint32_t n) const { return parent_.at(n); }
  const std::vector<std::uint32_t>& children(std::uint32_t n) const { return children_.at(n); }
  std::uint32_t depth(std::uint32_t n) const { return depth_.at(n); }

  // Nodes in an order where every parent precedes its children.
  std::vector<std::uint32_t> top_down() const {
    std::vector<std::uint32_t> order{0};
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (auto c : children_[order[i]]) order.push_back(c);
    }
    return order;
  }

  std::vector<std::uint32_t> subtree_sizes() const {
    std::vector<std::uint32_t> s(size(), 1);
    auto order = top_down();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (*it != 0) s[parent_[*it]] += s[*it];
    }
    return s;
  }

  std::vector<std::uint32_t> heights() const {
    std::vector<std::uint32_t> h(size(), 0);
    auto order = top_down();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (*it != 0) h[parent_[*it]] = std::max(h[parent_[*it]], h[*it] + 1);
    }
    return h;
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::vector<std::uint32_t>> children_;
  std::vector<std::uint32_t> depth_;
};

// Shortest-path tree toward `dest`: parent(w) is w's next hop toward dest.
// Only vertices that reach dest are present.
struct SpTree {
  Vertex dest = 0;
  RootedTree tree;
  std::vector<Vertex> vertex;  // node -> graph vertex
};

inline std::vector<SpTree> build_sp_trees(const SpMatrix& m) {
  const auto n = static_cast<Vertex>(m.dimension());
  std::vector<SpTree> out;
  out.reserve(n);
  std::vector<std::vector<Vertex>> kids(n);
  for (Vertex v = 0; v < n; ++v) {
    for (auto& k : kids) k.clear();
    for (Vertex w = 0; w < n; ++w) {
      if (auto p = m.at(w, v); p != kNoVertex) kids[p].push_back(w);
    }
    SpTree t{v, {}, {v}};
    for (std::size_t i = 0; i < t.vertex.size(); ++i) {
      for (auto w : kids[t.vertex[i]]) {
        t.tree.add_child(static_cast<std::uint32_t>(i));
        t.vertex.push_back(w);
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<SpTree> build_sp_trees(const Graph& g) {
  return build_sp_trees(compute_sp_matrix(g));
}

// AHU canonical label: a leaf is "()", an internal node is "(" followed by
// its children's labels in sorted order, then ")".
inline std::string ahu_label(const RootedTree& t, std::uint32_t root = 0) {
  std::vector<std::string> label(t.size());
  std::vector<std::uint32_t> order{root};
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (auto c : t.children(order[i])) order.push_back(c);
  }
  std::vector<std::string> parts;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    parts.clear();
    for (auto c : t.children(*it)) parts.push_back(std::move(label[c]));
    std::sort(parts.begin(), parts.end());
    std::string s = "(";
    for (auto& p : parts) s += p;
    s += ')';
    label[*it] = std::move(s);
  }
  return std::move(label[root]);
}

}  // namespace obge
