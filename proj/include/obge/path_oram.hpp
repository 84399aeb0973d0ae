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
#include <bit>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "obge/crypto.hpp"
#include "obge/oram_tree.hpp"

// Non-recursive Path ORAM: a server-held tree of Z-slot buckets plus a
// controller-held stash. Every access reads one root-to-leaf path, pulls its
// real blocks into the stash, remaps the requested block to a fresh leaf and
// greedily evicts the stash back into the same path with fresh encryptions.
//
// Slot plaintext layout (encrypted under K2, one ciphertext per slot):
//
//   id (16) | payload (payload_width) | leaf (8, BE) | dummy flag (1)
namespace obge {

using BlockId = Token;

inline BlockId block_id_from_index(std::uint64_t index) {
  BlockId id;
  store_be(std::span(id.bytes).first(8), index, 8);
  return id;
}

inline std::uint64_t index_from_block_id(const BlockId& id) {
  return load_be(std::span(id.bytes).first(8), 8);
}

// Smallest L with Z * 2^L >= real_slots, i.e. max(0, ceil(log2(ceil(R / Z)))).
inline std::uint32_t depth_for(std::uint64_t real_slots, std::uint32_t bucket_size) {
  if (bucket_size == 0) throw ConfigError("bucket size must be >= 1");
  const std::uint64_t leaves_needed = (real_slots + bucket_size - 1) / bucket_size;
  std::uint32_t depth = 0;
  while ((std::uint64_t{1} << depth) < leaves_needed) ++depth;
  return depth;
}

struct OramParams {
  std::uint32_t depth = 0;
  std::uint32_t bucket_size = 5;
  std::uint32_t payload_width = 0;
  std::size_t stash_max = 128;

  static constexpr std::size_t kIdBytes = 16;
  static constexpr std::size_t kLeafBytes = 8;

  std::size_t slot_plain_width() const { return kIdBytes + payload_width + kLeafBytes + 1; }
  std::uint32_t block_width() const {
    return static_cast<std::uint32_t>(Aead::ciphertext_width(slot_plain_width()));
  }
  std::uint64_t leaf_count() const { return std::uint64_t{1} << depth; }
  std::uint64_t bucket_count() const { return (std::uint64_t{2} << depth) - 1; }
  std::size_t path_bytes() const { return std::size_t{depth + 1} * bucket_size * block_width(); }
  std::uint64_t blocks_per_access() const { return 2ull * bucket_size * (depth + 1); }

  bool operator==(const OramParams&) const = default;
};

struct Block {
  BlockId id;
  Leaf leaf = 0;
  Bytes payload;

  bool operator==(const Block&) const = default;
};

// Controller-side overflow buffer. Holds decrypted real blocks only.
class Stash {
 public:
  void add(Block b) {
    if (find(b.id) != nullptr) throw IntegrityError("block appears twice in stash");
    blocks_.push_back(std::move(b));
  }

  Block* find(const BlockId& id) {
    for (auto& b : blocks_) {
      if (b.id == id) return &b;
    }
    return nullptr;
  }

  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::vector<Block>& blocks() { return blocks_; }

  bool operator==(const Stash&) const = default;

 private:
  std::vector<Block> blocks_;
};

namespace detail {

inline void encode_slot(const OramParams& p, const Block* b, MutableByteSpan out) {
  std::fill(out.begin(), out.end(), 0);
  if (b == nullptr) {
    out[out.size() - 1] = 1;
    return;
  }
  if (b->payload.size() != p.payload_width) throw RangeError("block payload width mismatch");
  std::copy(b->id.bytes.begin(), b->id.bytes.end(), out.begin());
  std::copy(b->payload.begin(), b->payload.end(), out.begin() + OramParams::kIdBytes);
  store_be(out.subspan(OramParams::kIdBytes + p.payload_width, OramParams::kLeafBytes), b->leaf,
           OramParams::kLeafBytes);
}

// nullopt for dummies.
inline std::optional<Block> decode_slot(const OramParams& p, ByteSpan plain) {
  if (plain.size() != p.slot_plain_width()) throw IntegrityError("slot width mismatch");
  const auto flag = plain.back();
  if (flag == 1) return std::nullopt;
  if (flag != 0) throw IntegrityError("bad slot flag");
  Block b;
  b.id = Token::from(plain.first(OramParams::kIdBytes));
  auto payload = plain.subspan(OramParams::kIdBytes, p.payload_width);
  b.payload.assign(payload.begin(), payload.end());
  b.leaf = load_be(plain.subspan(OramParams::kIdBytes + p.payload_width, OramParams::kLeafBytes),
                   OramParams::kLeafBytes);
  if (b.leaf >= p.leaf_count()) throw IntegrityError("block leaf out of range");
  return b;
}

// Deepest level of the path to `path_leaf` that also lies on the path to `leaf`.
inline std::uint32_t deepest_common_level(Leaf leaf, Leaf path_leaf, std::uint32_t depth) {
  const auto diff = leaf ^ path_leaf;
  return depth - static_cast<std::uint32_t>(std::bit_width(diff));
}

}  // namespace detail

struct BuiltTree {
  OramTree tree;
  Stash stash;
};

// Lays out blocks with preassigned leaves: each goes to the deepest bucket
// on its path with a free slot, otherwise to the stash. Every other slot is
// an encrypted dummy.
inline BuiltTree build_tree(const OramParams& params, std::span<const Block> blocks,
                            ByteSpan key, Drbg& rng) {
  const auto z = params.bucket_size;
  if (blocks.size() > params.bucket_count() * z + params.stash_max) {
    throw CapacityError(std::to_string(blocks.size()) + " blocks exceed tree + stash capacity");
  }
  std::vector<std::int64_t> owner(params.bucket_count() * z, -1);
  std::vector<std::uint32_t> used(params.bucket_count(), 0);
  BuiltTree out{OramTree(params.depth, z, params.block_width()), Stash{}};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].leaf >= params.leaf_count()) throw RangeError("initial leaf out of range");
    bool placed = false;
    for (std::int64_t level = params.depth; level >= 0 && !placed; --level) {
      auto node = OramTree::node_on_path(blocks[i].leaf, static_cast<std::uint32_t>(level),
                                         params.depth);
      if (used[node] < z) {
        owner[node * z + used[node]++] = static_cast<std::int64_t>(i);
        placed = true;
      }
    }
    if (!placed) out.stash.add(blocks[i]);
  }
  if (out.stash.size() > params.stash_max) {
    throw CapacityError("initial placement overflows the stash");
  }
  Aead aead(key);
  Bytes plain(params.slot_plain_width());
  const auto width = params.block_width();
  for (std::uint64_t node = 0; node < params.bucket_count(); ++node) {
    auto bucket = out.tree.bucket(node);
    for (std::uint32_t s = 0; s < z; ++s) {
      auto o = owner[node * z + s];
      detail::encode_slot(params, o < 0 ? nullptr : &blocks[static_cast<std::size_t>(o)], plain);
      aead.encrypt_into(plain, plain.size(), rng, bucket.subspan(std::size_t{s} * width, width));
    }
  }
  return out;
}

// The access engine for one tree. Position bookkeeping belongs to the
// caller: it supplies the path to read and the leaf to remap to.
class PathOram {
 public:
  using Mutator = std::function<void(MutableByteSpan payload)>;

  PathOram(OramParams params, ByteSpan key, PathStorage& storage, TreeId tree, Stash stash,
           Drbg rng)
      : params_(params),
        aead_(key),
        storage_(&storage),
        tree_(tree),
        stash_(std::move(stash)),
        rng_(std::move(rng)),
        plain_(params.slot_plain_width()) {}

  const OramParams& params() const { return params_; }
  TreeId tree_id() const { return tree_; }
  const Stash& stash() const { return stash_; }
  std::size_t max_stash_seen() const { return max_stash_; }
  std::uint64_t accesses() const { return accesses_; }
  std::uint64_t blocks_transferred() const { return accesses_ * params_.blocks_per_access(); }

  Leaf random_leaf() { return rng_.uniform(params_.leaf_count()); }
  Drbg& rng() { return rng_; }

  // Reads P(path), remaps block `id` (if found) to `new_leaf`, lets `mutate`
  // edit its payload, evicts and writes the path back. Returns the block as
  // it is after mutation, or nullopt if it was in neither path nor stash.
  std::optional<Block> access(const BlockId& id, Leaf path, Leaf new_leaf,
                              const Mutator& mutate = {}) {
    return run(&id, path, new_leaf, mutate);
  }

  // Reads and rewrites a uniformly random path; looks for nothing.
  void dummy_access() { run(nullptr, random_leaf(), 0, {}); }

 private:
  std::optional<Block> run(const BlockId* id, Leaf path, Leaf new_leaf, const Mutator& mutate) {
    if (path >= params_.leaf_count()) throw RangeError("path leaf out of range");
    if (id != nullptr && new_leaf >= params_.leaf_count()) throw RangeError("new leaf out of range");
    const auto width = params_.block_width();
    const auto z = params_.bucket_size;

    Bytes buf = storage_->read_path(tree_, path);
    if (buf.size() != params_.path_bytes()) throw ProtocolError("path data has wrong width");
    for (std::size_t off = 0; off < buf.size(); off += width) {
      aead_.decrypt_into(ByteSpan(buf).subspan(off, width), plain_);
      if (auto b = detail::decode_slot(params_, plain_)) stash_.add(std::move(*b));
    }

    std::optional<Block> result;
    if (id != nullptr) {
      if (Block* b = stash_.find(*id)) {
        b->leaf = new_leaf;
        if (mutate) mutate(b->payload);
        result = *b;
      }
    }

    // Greedy eviction, deepest bucket first.
    auto& blocks = stash_.blocks();
    std::vector<std::uint32_t> reach(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      reach[i] = detail::deepest_common_level(blocks[i].leaf, path, params_.depth);
    }
    std::vector<bool> evicted(blocks.size(), false);
    for (std::int64_t level = params_.depth; level >= 0; --level) {
      std::uint32_t filled = 0;
      const auto lvl = static_cast<std::uint32_t>(level);
      for (std::size_t i = 0; i < blocks.size() && filled < z; ++i) {
        if (evicted[i] || reach[i] < lvl) continue;
        write_slot(buf, lvl, filled++, &blocks[i]);
        evicted[i] = true;
      }
      for (; filled < z; ++filled) write_slot(buf, lvl, filled, nullptr);
    }
    std::vector<Block> remaining;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (!evicted[i]) remaining.push_back(std::move(blocks[i]));
    }
    blocks = std::move(remaining);

    storage_->write_path(tree_, path, buf);
    ++accesses_;
    max_stash_ = std::max(max_stash_, stash_.size());
    if (stash_.size() > params_.stash_max) {
      throw StashOverflow("stash holds " + std::to_string(stash_.size()) + " blocks, limit " +
                          std::to_string(params_.stash_max));
    }
    return result;
  }

  void write_slot(Bytes& buf, std::uint32_t level, std::uint32_t slot, const Block* b) {
    const auto width = params_.block_width();
    const auto off = (std::size_t{level} * params_.bucket_size + slot) * width;
    detail::encode_slot(params_, b, plain_);
    aead_.encrypt_into(plain_, plain_.size(), rng_, MutableByteSpan(buf).subspan(off, width));
  }

  OramParams params_;
  Aead aead_;
  PathStorage* storage_;
  TreeId tree_;
  Stash stash_;
  Drbg rng_;
  Bytes plain_;
  std::size_t max_stash_ = 0;
  std::uint64_t accesses_ = 0;
};

// Debug walker: every real block in a tree image with the heap index of the
// bucket holding it.
inline std::vector<std::pair<Block, std::uint64_t>> decrypt_tree(const OramTree& tree,
                                                                 const OramParams& params,
                                                                 ByteSpan key) {
  Aead aead(key);
  std::vector<std::pair<Block, std::uint64_t>> out;
  Bytes plain;
  const auto width = params.block_width();
  for (std::uint64_t node = 0; node < tree.bucket_count(); ++node) {
    auto bucket = tree.bucket(node);
    for (std::uint32_t s = 0; s < params.bucket_size; ++s) {
      aead.decrypt_into(bucket.subspan(std::size_t{s} * width, width), plain);
      if (auto b = detail::decode_slot(params, plain)) out.emplace_back(std::move(*b), node);
    }
  }
  return out;
}

// True if the bucket at heap index `node` lies on the path to `leaf`.
inline bool node_on_leaf_path(std::uint64_t node, Leaf leaf, std::uint32_t depth) {
  const auto level = static_cast<std::uint32_t>(std::bit_width(node + 1) - 1);
  return OramTree::node_on_path(leaf, level, depth) == node;
}

// Controller-state persistence helpers.
inline void write_params(ByteWriter& w, const OramParams& p) {
  w.u32(p.depth).u32(p.bucket_size).u32(p.payload_width).u64(p.stash_max);
}

inline OramParams read_params(ByteReader& r) {
  OramParams p;
  p.depth = r.u32();
  p.bucket_size = r.u32();
  p.payload_width = r.u32();
  p.stash_max = r.u64();
  if (p.depth > 40 || p.bucket_size == 0) throw ProtocolError("bad ORAM parameters");
  return p;
}

inline void write_stash(ByteWriter& w, const Stash& s) {
  w.u32(static_cast<std::uint32_t>(s.size()));
  for (const auto& b : s.blocks()) w.raw(b.id.span()).u64(b.leaf).blob(b.payload);
}

inline Stash read_stash(ByteReader& r) {
  Stash s;
  auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    Block b;
    b.id = Token::from(r.raw(16));
    b.leaf = r.u64();
    auto payload = r.blob();
    b.payload.assign(payload.begin(), payload.end());
    s.add(std::move(b));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Token-addressed ORAM: blocks identified by PRF tokens, flat position map.

using PositionMap = std::unordered_map<Token, Leaf, TokenHash>;

// Data blocks carry the token of the next hop and the K1-encrypted (w, v).
inline constexpr std::size_t kPairPadWidth = 12;
inline constexpr std::size_t kHopCiphertextWidth = Aead::ciphertext_width(kPairPadWidth);
inline constexpr std::uint32_t kHopPayloadWidth = 16 + kHopCiphertextWidth;

struct HopRecord {
  Token next;
  Bytes ct;

  Bytes encode() const {
    if (ct.size() != kHopCiphertextWidth) throw RangeError("hop ciphertext width mismatch");
    Bytes out(next.bytes.begin(), next.bytes.end());
    out.insert(out.end(), ct.begin(), ct.end());
    return out;
  }

  static HopRecord decode(ByteSpan payload) {
    if (payload.size() != kHopPayloadWidth) throw IntegrityError("hop payload width mismatch");
    return HopRecord{Token::from(payload.first(16)),
                     Bytes(payload.begin() + 16, payload.end())};
  }
};

inline OramParams data_params(std::uint64_t real_slots, std::uint32_t bucket_size,
                              std::size_t stash_max = 128) {
  return OramParams{depth_for(real_slots, bucket_size), bucket_size, kHopPayloadWidth, stash_max};
}

struct TokenBlock {
  Token tk;
  Token next;
  Bytes ct;
};

struct OramState {
  OramParams params;
  OramTree tree;
  PositionMap pm;
  Stash stash;
};

// Sizes the tree for `real_slots` (>= blocks.size()), assigns each block an
// independent uniform leaf and builds the encrypted tree.
inline OramState oram_init(std::span<const TokenBlock> blocks, std::uint32_t bucket_size,
                           std::uint64_t real_slots, ByteSpan key, Drbg& rng,
                           std::size_t stash_max = 128) {
  if (real_slots < blocks.size()) throw ConfigError("real slot count below block count");
  auto params = data_params(real_slots, bucket_size, stash_max);
  PositionMap pm;
  pm.reserve(blocks.size());
  std::vector<Block> placed;
  placed.reserve(blocks.size());
  for (const auto& tb : blocks) {
    Leaf x = rng.uniform(params.leaf_count());
    if (!pm.emplace(tb.tk, x).second) throw ConfigError("duplicate block token");
    placed.push_back(Block{tb.tk, x, HopRecord{tb.next, tb.ct}.encode()});
  }
  auto built = build_tree(params, placed, key, rng);
  return OramState{params, std::move(built.tree), std::move(pm), std::move(built.stash)};
}

class TokenOram {
 public:
  TokenOram(OramParams params, ByteSpan key, PositionMap pm, Stash stash, PathStorage& storage,
            TreeId tree, Drbg rng)
      : engine_(params, key, storage, tree, std::move(stash), std::move(rng)), pm_(std::move(pm)) {}

  // Known token: access its path and remap. Unknown token: dummy access of
  // identical shape, returns nullopt.
  std::optional<Block> access(const Token& tk) {
    auto it = pm_.find(tk);
    if (it == pm_.end()) {
      engine_.dummy_access();
      return std::nullopt;
    }
    const Leaf fresh = engine_.random_leaf();
    const Leaf old = std::exchange(it->second, fresh);
    auto b = engine_.access(tk, old, fresh);
    if (!b) throw IntegrityError("mapped block missing from its path and the stash");
    return b;
  }

  const PositionMap& position_map() const { return pm_; }
  PathOram& engine() { return engine_; }
  const PathOram& engine() const { return engine_; }

 private:
  PathOram engine_;
  PositionMap pm_;
};

}  // namespace obge
