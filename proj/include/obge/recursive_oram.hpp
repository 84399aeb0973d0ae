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

#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "obge/graph.hpp"
#include "obge/path_oram.hpp"

// Recursive position map for the controller. Data-block positions are
// addressed densely (a = u * |V| + v) and packed chi per block into a chain
// of smaller Path ORAMs, until the topmost position array fits the budget.
//
// Level k holds the positions of level k-1 blocks (level 0 holds data-block
// positions). Every lookup walks the chain top-down with one access per
// level, whether or not the address is populated.
namespace obge {

// Position entry for addresses with no data block (diagonal, disconnected).
inline constexpr Leaf kAbsent = std::numeric_limits<Leaf>::max();
inline constexpr std::size_t kPositionEntryBytes = 8;

struct AddressScheme {
  std::uint32_t vertex_count = 0;

  std::uint64_t size() const { return std::uint64_t{vertex_count} * vertex_count; }

  std::uint64_t address(Vertex u, Vertex v) const {
    if (u >= vertex_count || v >= vertex_count) throw RangeError("vertex pair out of range");
    return std::uint64_t{u} * vertex_count + v;
  }

  std::pair<Vertex, Vertex> pair(std::uint64_t a) const {
    if (a >= size()) throw RangeError("address out of range");
    return {static_cast<Vertex>(a / vertex_count), static_cast<Vertex>(a % vertex_count)};
  }
};

struct RecursiveConfig {
  std::size_t chi = 64;
  std::size_t budget_bytes = std::numeric_limits<std::size_t>::max();
  std::uint32_t bucket_size = 5;
  std::size_t stash_max = 128;
  TreeId first_tree = 1;
};

class RecursivePositionMap {
 public:
  // `assignments[a]` is the data leaf of address a, or kAbsent. Builds and
  // uploads one tree per level; level k gets tree id first_tree + k.
  static RecursivePositionMap build(std::vector<Leaf> assignments, std::uint64_t data_leaf_count,
                                    const RecursiveConfig& cfg, ByteSpan key,
                                    PathStorage& storage, Drbg& rng) {
    if (cfg.chi < 2) throw ConfigError("packing factor chi must be >= 2");
    if (cfg.budget_bytes < kPositionEntryBytes) {
      throw ConfigError("budget cannot hold a single position entry");
    }
    RecursivePositionMap m;
    m.chi_ = cfg.chi;
    m.address_count_ = assignments.size();
    m.data_leaf_count_ = data_leaf_count;
    m.rng_ = rng.fork();
    auto entries = std::move(assignments);
    TreeId tree = cfg.first_tree;
    while (entries.size() * kPositionEntryBytes > cfg.budget_bytes) {
      const std::size_t n_blocks = (entries.size() + cfg.chi - 1) / cfg.chi;
      OramParams params{depth_for(n_blocks, cfg.bucket_size), cfg.bucket_size,
                        static_cast<std::uint32_t>(cfg.chi * kPositionEntryBytes), cfg.stash_max};
      std::vector<Block> blocks(n_blocks);
      std::vector<Leaf> next(n_blocks);
      for (std::size_t j = 0; j < n_blocks; ++j) {
        blocks[j].id = block_id_from_index(j);
        blocks[j].leaf = next[j] = rng.uniform(params.leaf_count());
        blocks[j].payload.assign(params.payload_width, 0xFF);
        for (std::size_t i = 0; i < cfg.chi && j * cfg.chi + i < entries.size(); ++i) {
          store_be(MutableByteSpan(blocks[j].payload).subspan(i * kPositionEntryBytes,
                                                              kPositionEntryBytes),
                   entries[j * cfg.chi + i], kPositionEntryBytes);
        }
      }
      auto built = build_tree(params, blocks, key, rng);
      storage.upload_tree(tree, built.tree);
      m.levels_.emplace_back(params, key, storage, tree, std::move(built.stash), rng.fork());
      entries = std::move(next);
      ++tree;
    }
    m.top_ = std::move(entries);
    return m;
  }

  // Returns (current data leaf, fresh data leaf) for `address` and installs
  // the fresh one. Absent addresses yield (kAbsent, unused fresh leaf) and
  // stay absent; the level accesses are performed either way.
  std::pair<Leaf, Leaf> get_and_remap(std::uint64_t address) {
    if (address >= address_count_) throw RangeError("address out of range");
    const auto depth = levels_.size();
    if (depth == 0) {
      const Leaf fresh = rng_.uniform(data_leaf_count_);
      Leaf& slot = top_[address];
      if (slot == kAbsent) return {kAbsent, fresh};
      return {std::exchange(slot, fresh), fresh};
    }
    std::vector<std::uint64_t> index(depth), offset(depth);
    std::uint64_t a = address;
    for (std::size_t k = 0; k < depth; ++k) {
      offset[k] = a % chi_;
      a /= chi_;
      index[k] = a;
    }
    Leaf path = top_[index[depth - 1]];
    Leaf remap = levels_[depth - 1].random_leaf();
    top_[index[depth - 1]] = remap;
    for (std::size_t k = depth; k-- > 0;) {
      const Leaf child_fresh =
          k > 0 ? levels_[k - 1].random_leaf() : rng_.uniform(data_leaf_count_);
      Leaf found = kAbsent;
      auto block = levels_[k].access(
          block_id_from_index(index[k]), path, remap, [&](MutableByteSpan payload) {
            auto entry = payload.subspan(offset[k] * kPositionEntryBytes, kPositionEntryBytes);
            found = load_be(entry, kPositionEntryBytes);
            if (k > 0 || found != kAbsent) store_be(entry, child_fresh, kPositionEntryBytes);
          });
      if (!block) throw IntegrityError("position block missing at level " + std::to_string(k));
      if (k > 0 && found == kAbsent) throw IntegrityError("absent position for a level block");
      path = found;
      remap = child_fresh;
    }
    return {path, remap};
  }

  std::size_t depth() const { return levels_.size(); }
  std::size_t chi() const { return chi_; }
  std::uint64_t address_count() const { return address_count_; }
  const std::vector<Leaf>& top() const { return top_; }
  std::size_t top_bytes() const { return top_.size() * kPositionEntryBytes; }

  std::size_t stash_bytes() const {
    std::size_t total = 0;
    for (const auto& l : levels_) total += l.stash().size() * l.params().slot_plain_width();
    return total;
  }

  std::size_t largest_slot_width() const {
    std::size_t w = 0;
    for (const auto& l : levels_) w = std::max(w, l.params().slot_plain_width());
    return w;
  }

  std::vector<PathOram>& levels() { return levels_; }
  const std::vector<PathOram>& levels() const { return levels_; }

  void serialize(ByteWriter& w) const {
    w.u64(chi_).u64(address_count_).u64(data_leaf_count_);
    w.u64(top_.size());
    for (auto leaf : top_) w.u64(leaf);
    w.u32(static_cast<std::uint32_t>(levels_.size()));
    for (const auto& l : levels_) {
      w.u32(l.tree_id());
      write_params(w, l.params());
      write_stash(w, l.stash());
    }
  }

  static RecursivePositionMap restore(ByteReader& r, ByteSpan key, PathStorage& storage,
                                      Drbg& rng) {
    RecursivePositionMap m;
    m.chi_ = r.u64();
    m.address_count_ = r.u64();
    m.data_leaf_count_ = r.u64();
    if (m.chi_ < 2 || m.data_leaf_count_ == 0) throw ProtocolError("bad position map header");
    auto n = r.u64();
    if (n > r.remaining() / kPositionEntryBytes) throw ProtocolError("truncated position map");
    m.top_.resize(n);
    for (auto& leaf : m.top_) leaf = r.u64();
    auto levels = r.u32();
    for (std::uint32_t k = 0; k < levels; ++k) {
      auto tree = r.u32();
      auto params = read_params(r);
      m.levels_.emplace_back(params, key, storage, tree, read_stash(r), rng.fork());
    }
    m.rng_ = rng.fork();
    return m;
  }

 private:
  RecursivePositionMap() : rng_(0) {}

  std::size_t chi_ = 64;
  std::uint64_t address_count_ = 0;
  std::uint64_t data_leaf_count_ = 1;
  std::vector<Leaf> top_;
  std::vector<PathOram> levels_;
  Drbg rng_;
};

// Data ORAM addressed by a = u * |V| + v, positions held in a recursive map.
class AddressOram {
 public:
  AddressOram(PathOram data, RecursivePositionMap positions)
      : data_(std::move(data)), positions_(std::move(positions)) {}

  // One access per position level plus one data access, hit or miss.
  std::optional<Block> access(std::uint64_t address) {
    auto [old_leaf, fresh] = positions_.get_and_remap(address);
    if (old_leaf == kAbsent) {
      data_.dummy_access();
      return std::nullopt;
    }
    auto b = data_.access(block_id_from_index(address), old_leaf, fresh);
    if (!b) throw IntegrityError("mapped block missing from its path and the stash");
    return b;
  }

  PathOram& data() { return data_; }
  const PathOram& data() const { return data_; }
  RecursivePositionMap& positions() { return positions_; }
  const RecursivePositionMap& positions() const { return positions_; }

  // Top array + every stash (plaintext slot width); keys are added by the owner.
  std::size_t resident_bytes() const {
    return positions_.top_bytes() + positions_.stash_bytes() +
           data_.stash().size() * data_.params().slot_plain_width();
  }

  std::size_t largest_slot_width() const {
    return std::max(positions_.largest_slot_width(), data_.params().slot_plain_width());
  }

 private:
  PathOram data_;
  RecursivePositionMap positions_;
};

}  // namespace obge
