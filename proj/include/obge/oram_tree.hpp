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
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "obge/bytes.hpp"
#include "obge/trace.hpp"
#include "obge/wire.hpp"

namespace obge {

inline constexpr char kTreeMagic[4] = {'O', 'B', 'G', 'T'};
inline constexpr std::uint16_t kTreeVersion = 1;
inline constexpr std::size_t kTreeHeaderBytes = 4 + 2 + 4 + 4 + 4;

// Server-side binary tree of buckets, heap layout: node 0 is the root and
// node i has children 2i+1 and 2i+2. Leaf x is node 2^L - 1 + x. Each bucket
// is Z opaque slots of block_width bytes.
class OramTree {
 public:
  OramTree() = default;
  OramTree(std::uint32_t depth, std::uint32_t bucket_size, std::uint32_t block_width)
      : depth_(depth), bucket_size_(bucket_size), block_width_(block_width) {
    if (depth > 40) throw ConfigError("tree depth too large");
    if (bucket_size == 0) throw ConfigError("bucket size must be >= 1");
    data_.assign(bucket_count() * bucket_bytes(), 0);
  }

  std::uint32_t depth() const { return depth_; }
  std::uint32_t bucket_size() const { return bucket_size_; }
  std::uint32_t block_width() const { return block_width_; }
  std::uint64_t leaf_count() const { return std::uint64_t{1} << depth_; }
  std::uint64_t bucket_count() const { return (std::uint64_t{2} << depth_) - 1; }
  std::size_t bucket_bytes() const { return std::size_t{bucket_size_} * block_width_; }
  std::size_t path_bytes() const { return (depth_ + 1) * bucket_bytes(); }
  TreeShape shape(TreeId id) const { return {id, depth_, bucket_size_, block_width_}; }

  // Heap index of the bucket at `level` (0 = root) on the path to `leaf`.
  static std::uint64_t node_on_path(Leaf leaf, std::uint32_t level, std::uint32_t depth) {
    return ((std::uint64_t{1} << level) - 1) + (leaf >> (depth - level));
  }

  void check_leaf(Leaf leaf) const {
    if (leaf >= leaf_count()) {
      throw RangeError("leaf " + std::to_string(leaf) + " out of range [0, " +
                       std::to_string(leaf_count()) + ")");
    }
  }

  MutableByteSpan bucket(std::uint64_t node) {
    return MutableByteSpan(data_).subspan(node * bucket_bytes(), bucket_bytes());
  }
  ByteSpan bucket(std::uint64_t node) const {
    return ByteSpan(data_).subspan(node * bucket_bytes(), bucket_bytes());
  }

  // Root first.
  Bytes read_path(Leaf leaf) const {
    check_leaf(leaf);
    Bytes out;
    out.reserve(path_bytes());
    for (std::uint32_t level = 0; level <= depth_; ++level) {
      auto b = bucket(node_on_path(leaf, level, depth_));
      out.insert(out.end(), b.begin(), b.end());
    }
    return out;
  }

  void write_path(Leaf leaf, ByteSpan buckets) {
    check_leaf(leaf);
    if (buckets.size() != path_bytes()) {
      throw ProtocolError("path payload is " + std::to_string(buckets.size()) +
                          " bytes, expected " + std::to_string(path_bytes()));
    }
    for (std::uint32_t level = 0; level <= depth_; ++level) {
      auto src = buckets.subspan(level * bucket_bytes(), bucket_bytes());
      auto dst = bucket(node_on_path(leaf, level, depth_));
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }

  // Tree file: magic | version | L | Z | B | buckets in heap order.
  Bytes serialize() const {
    ByteWriter w(kTreeHeaderBytes + data_.size());
    w.raw(std::string_view(kTreeMagic, 4)).u16(kTreeVersion).u32(depth_).u32(bucket_size_);
    w.u32(block_width_).raw(data_);
    return std::move(w).take();
  }

  static OramTree parse(ByteSpan image) {
    ByteReader r(image);
    auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), kTreeMagic)) throw ProtocolError("bad tree magic");
    if (auto v = r.u16(); v != kTreeVersion) {
      throw ProtocolError("unsupported tree version " + std::to_string(v));
    }
    auto depth = r.u32();
    auto z = r.u32();
    auto b = r.u32();
    if (depth > 40 || z == 0) throw ProtocolError("bad tree header");
    OramTree t(depth, z, b);
    auto body = r.rest();
    if (body.size() != t.data_.size()) throw ProtocolError("tree body size mismatch");
    std::copy(body.begin(), body.end(), t.data_.begin());
    return t;
  }

  void save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }
  static OramTree load(const std::filesystem::path& path) { return parse(read_file(path)); }

  const Bytes& raw() const { return data_; }

 private:
  std::uint32_t depth_ = 0;
  std::uint32_t bucket_size_ = 1;
  std::uint32_t block_width_ = 0;
  Bytes data_;
};

// The server-side halves of an ORAM access.
class PathStorage {
 public:
  virtual ~PathStorage() = default;
  virtual Bytes read_path(TreeId tree, Leaf leaf) = 0;
  virtual void write_path(TreeId tree, Leaf leaf, ByteSpan buckets) = 0;
  virtual void upload_tree(TreeId tree, const OramTree& image) = 0;
};

// In-memory tree storage. Every call is logged to the AccessTrace with the
// sizes of the messages it corresponds to on the wire.
class TreeStore : public PathStorage {
 public:
  explicit TreeStore(std::shared_ptr<AccessTrace> trace = std::make_shared<AccessTrace>())
      : trace_(std::move(trace)) {}

  Bytes read_path(TreeId tree, Leaf leaf) override {
    std::lock_guard lock(mu_);
    auto out = get(tree).read_path(leaf);
    trace_->record(MsgType::ReadPath, tree, leaf, 12);
    trace_->record(MsgType::PathData, tree, std::nullopt, out.size());
    return out;
  }

  void write_path(TreeId tree, Leaf leaf, ByteSpan buckets) override {
    std::lock_guard lock(mu_);
    get(tree).write_path(leaf, buckets);
    trace_->record(MsgType::WritePath, tree, leaf, 12 + buckets.size());
    trace_->record(MsgType::Ack, tree, std::nullopt, 0);
  }

  void upload_tree(TreeId tree, const OramTree& image) override {
    std::lock_guard lock(mu_);
    trees_[tree] = image;
    trace_->note_tree(image.shape(tree));
    trace_->record(MsgType::UploadTree, tree, std::nullopt,
                   4 + kTreeHeaderBytes + image.raw().size());
    trace_->record(MsgType::Ack, tree, std::nullopt, 0);
  }

  // Loads a tree without logging it (startup from disk).
  void install(TreeId tree, OramTree image) {
    std::lock_guard lock(mu_);
    trace_->note_tree(image.shape(tree));
    trees_[tree] = std::move(image);
  }

  bool has_tree(TreeId tree) const {
    std::lock_guard lock(mu_);
    return trees_.count(tree) != 0;
  }

  // Copy, so callers never observe a tree mid-write.
  OramTree snapshot(TreeId tree) const {
    std::lock_guard lock(mu_);
    return get(tree);
  }

  std::vector<TreeId> tree_ids() const {
    std::lock_guard lock(mu_);
    std::vector<TreeId> ids;
    for (const auto& [id, t] : trees_) ids.push_back(id);
    return ids;
  }

  AccessTrace& trace() { return *trace_; }
  std::shared_ptr<AccessTrace> trace_ptr() const { return trace_; }

 private:
  OramTree& get(TreeId tree) {
    auto it = trees_.find(tree);
    if (it == trees_.end()) throw RangeError("no tree with id " + std::to_string(tree));
    return it->second;
  }
  const OramTree& get(TreeId tree) const {
    auto it = trees_.find(tree);
    if (it == trees_.end()) throw RangeError("no tree with id " + std::to_string(tree));
    return it->second;
  }

  mutable std::mutex mu_;
  std::map<TreeId, OramTree> trees_;
  std::shared_ptr<AccessTrace> trace_;
};

}  // namespace obge
