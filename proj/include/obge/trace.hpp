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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "obge/wire.hpp"

// What the untrusted server sees: every message it receives or sends, with
// tree id, leaf id and payload size. Never plaintext, keys or controller state.
namespace obge {

struct TraceRecord {
  std::uint64_t seq = 0;
  std::uint64_t micros = 0;
  MsgType type = MsgType::Ack;
  std::optional<TreeId> tree;
  std::optional<Leaf> leaf;
  std::uint64_t bytes = 0;

  bool operator==(const TraceRecord&) const = default;
};

struct TreeShape {
  TreeId tree = 0;
  std::uint32_t depth = 0;
  std::uint32_t bucket_size = 0;
  std::uint32_t block_width = 0;

  bool operator==(const TreeShape&) const = default;
};

class AccessTrace {
 public:
  AccessTrace() : start_(std::chrono::steady_clock::now()) {}

  AccessTrace(const AccessTrace& other) {
    std::lock_guard lock(other.mu_);
    start_ = other.start_;
    records_ = other.records_;
    trees_ = other.trees_;
  }
  AccessTrace& operator=(const AccessTrace&) = delete;

  void record(MsgType type, std::optional<TreeId> tree, std::optional<Leaf> leaf,
              std::uint64_t bytes) {
    const auto now = std::chrono::steady_clock::now();
    std::lock_guard lock(mu_);
    records_.push_back(TraceRecord{
        records_.size(),
        static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::microseconds>(now - start_).count()),
        type, tree, leaf, bytes});
  }

  // Query boundary inserted by a harness; not a server observation.
  void mark() { record(MsgType::Marker, std::nullopt, std::nullopt, 0); }

  void note_tree(const TreeShape& shape) {
    std::lock_guard lock(mu_);
    trees_[shape.tree] = shape;
  }

  std::vector<TraceRecord> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }

  std::map<TreeId, TreeShape> trees() const {
    std::lock_guard lock(mu_);
    return trees_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return records_.size();
  }

  void clear() {
    std::lock_guard lock(mu_);
    records_.clear();
  }

  std::string to_csv() const {
    std::lock_guard lock(mu_);
    std::ostringstream os;
    for (const auto& [id, t] : trees_) {
      os << "# tree," << id << ',' << t.depth << ',' << t.bucket_size << ',' << t.block_width
         << '\n';
    }
    os << "seq,micros,type,tree,leaf,bytes\n";
    for (const auto& r : records_) {
      os << r.seq << ',' << r.micros << ',' << to_string(r.type) << ',';
      if (r.tree) os << *r.tree;
      os << ',';
      if (r.leaf) os << *r.leaf;
      os << ',' << r.bytes << '\n';
    }
    return os.str();
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write trace " + path.string());
    out << to_csv();
  }

  static AccessTrace parse_csv(std::istream& in) {
    AccessTrace t;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto fields = split(line);
      if (line.rfind("# tree,", 0) == 0) {
        if (fields.size() != 5) throw ParseError(lineno, "bad tree header");
        t.trees_[to_u32(fields[1], lineno)] =
            TreeShape{to_u32(fields[1], lineno), to_u32(fields[2], lineno),
                      to_u32(fields[3], lineno), to_u32(fields[4], lineno)};
        continue;
      }
      if (!header_seen) {
        if (line != "seq,micros,type,tree,leaf,bytes") throw ParseError(lineno, "missing header");
        header_seen = true;
        continue;
      }
      if (fields.size() != 6) throw ParseError(lineno, "expected 6 fields");
      TraceRecord r;
      r.seq = to_u64(fields[0], lineno);
      r.micros = to_u64(fields[1], lineno);
      r.type = type_from_name(fields[2], lineno);
      if (!fields[3].empty()) r.tree = to_u32(fields[3], lineno);
      if (!fields[4].empty()) r.leaf = to_u64(fields[4], lineno);
      r.bytes = to_u64(fields[5], lineno);
      t.records_.push_back(r);
    }
    if (!header_seen) throw ParseError(lineno, "empty trace");
    return t;
  }

  static AccessTrace load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace " + path.string());
    return parse_csv(in);
  }

 private:
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  }
  static std::uint64_t to_u64(const std::string& s, std::size_t lineno) {
    try {
      std::size_t used = 0;
      auto v = std::stoull(s, &used);
      if (used != s.size()) throw ParseError(lineno, "bad integer '" + s + "'");
      return v;
    } catch (const std::logic_error&) {
      throw ParseError(lineno, "bad integer '" + s + "'");
    }
  }
  static std::uint32_t to_u32(const std::string& s, std::size_t lineno) {
    return static_cast<std::uint32_t>(to_u64(s, lineno));
  }
  static MsgType type_from_name(const std::string& s, std::size_t lineno) {
    for (auto t : {MsgType::ReadPath, MsgType::PathData, MsgType::WritePath, MsgType::Ack,
                   MsgType::EnclaveRequest, MsgType::EnclaveResponse, MsgType::UploadTree,
                   MsgType::Error, MsgType::Marker}) {
      if (s == to_string(t)) return t;
    }
    throw ParseError(lineno, "unknown record type '" + s + "'");
  }

  std::chrono::steady_clock::time_point start_;
  mutable std::mutex mu_;
  std::vector<TraceRecord> records_;
  std::map<TreeId, TreeShape> trees_;
};

}  // namespace obge
