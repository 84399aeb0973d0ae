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
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "obge/crypto.hpp"
#include "obge/graph.hpp"
#include "obge/path_oram.hpp"
#include "obge/recursive_oram.hpp"

// Setup / Query / Reveal over an ORAM-backed encrypted next-hop dictionary.
//
// Trivial mode: the client keeps the position map and stash and talks to the
// storage server directly; blocks are identified by PRF tokens.
// Enhanced mode: a controller next to the server (the TEE stand-in) keeps
// them, addresses blocks by u * |V| + v, and the client sends one
// session-encrypted request per query.
namespace obge {

enum class Mode : std::uint8_t { trivial = 0, enhanced = 1 };
enum class PadMode : std::uint8_t { none = 0, full = 1 };

inline const char* to_string(Mode m) { return m == Mode::trivial ? "trivial" : "enhanced"; }
inline const char* to_string(PadMode p) { return p == PadMode::none ? "none" : "full"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "trivial") return Mode::trivial;
  if (s == "enhanced") return Mode::enhanced;
  throw ConfigError("unknown mode '" + s + "'");
}

inline PadMode parse_pad(const std::string& s) {
  if (s == "none") return PadMode::none;
  if (s == "full") return PadMode::full;
  throw ConfigError("unknown pad mode '" + s + "'");
}

inline constexpr TreeId kDataTree = 0;

struct SetupOptions {
  unsigned lambda = 128;
  std::uint32_t bucket_size = 5;
  PadMode pad = PadMode::none;
  Mode mode = Mode::trivial;
  std::size_t stash_max = 128;
  // Enhanced mode only.
  std::size_t budget_bytes = std::numeric_limits<std::size_t>::max();
  std::size_t chi = 64;
};

// Real slots the tree is sized for. Full padding covers every off-diagonal
// pair so the tree size reveals nothing beyond |V|.
inline std::uint64_t required_slots(PadMode pad, std::uint64_t vertex_count,
                                    std::uint64_t spdx_size) {
  if (pad == PadMode::none) return spdx_size;
  return vertex_count * vertex_count - vertex_count;
}

// Flat position map size over the dense address space.
inline std::size_t flat_position_map_bytes(std::uint64_t vertex_count) {
  return vertex_count * vertex_count * kPositionEntryBytes;
}

using EncryptedPath = std::vector<Bytes>;

// What the client holds after setup. The key file is this record.
struct ClientKeys {
  KeySet keys;
  Bytes session_key;  // enhanced mode channel key
  std::uint32_t vertex_count = 0;
  Mode mode = Mode::trivial;

  bool operator==(const ClientKeys&) const = default;

  Bytes serialize() const {
    ByteWriter w;
    w.raw(std::string_view("OBGK")).u16(1).u8(static_cast<std::uint8_t>(mode));
    w.u32(vertex_count).u16(static_cast<std::uint16_t>(keys.lambda));
    w.blob(keys.k1).blob(keys.k2).blob(keys.kprf).blob(session_key);
    return std::move(w).take();
  }

  static ClientKeys parse(ByteSpan data) {
    ByteReader r(data);
    auto magic = r.raw(4);
    if (std::string(magic.begin(), magic.end()) != "OBGK") throw ProtocolError("bad key file magic");
    if (r.u16() != 1) throw ProtocolError("unsupported key file version");
    ClientKeys k;
    auto mode = r.u8();
    if (mode > 1) throw ProtocolError("bad mode in key file");
    k.mode = static_cast<Mode>(mode);
    k.vertex_count = r.u32();
    k.keys.lambda = r.u16();
    auto take = [&r] {
      auto b = r.blob();
      return Bytes(b.begin(), b.end());
    };
    k.keys.k1 = take();
    k.keys.k2 = take();
    k.keys.kprf = take();
    k.session_key = take();
    r.expect_end();
    check_lambda(k.keys.lambda);
    return k;
  }
};

namespace detail {

inline Bytes encrypt_pair(Aead& aead, Vertex w, Vertex v, Drbg& rng) {
  return aead.encrypt(encode_pair(w, v), kPairPadWidth, rng);
}

}  // namespace detail

// Follows next-hop records from the start block until a miss.
template <class AccessFn>
EncryptedPath chase_hops(std::uint32_t vertex_count, AccessFn&& access_next) {
  EncryptedPath resp;
  for (std::uint64_t round = 0;; ++round) {
    if (round > vertex_count) throw IntegrityError("next-hop chain does not terminate");
    auto rec = access_next();
    if (!rec) break;
    resp.push_back(std::move(rec->ct));
  }
  return resp;
}

// ---------------------------------------------------------------------------
// Trivial mode

class TrivialClient {
 public:
  TrivialClient(ClientKeys keys, OramParams params, PositionMap pm, Stash stash,
                PathStorage& storage, Drbg rng)
      : keys_(std::move(keys)),
        prf_(keys_.keys.kprf),
        oram_(params, keys_.keys.k2, std::move(pm), std::move(stash), storage, kDataTree,
              std::move(rng)) {}

  // Access(P(u, v)), then Access(next token) until the ORAM returns nothing.
  EncryptedPath query(Vertex u, Vertex v) {
    check_pair(u, v);
    Token curr = prf_.eval(u, v);
    return chase_hops(keys_.vertex_count, [&]() -> std::optional<HopRecord> {
      auto block = oram_.access(curr);
      if (!block) return std::nullopt;
      auto rec = HopRecord::decode(block->payload);
      curr = rec.next;
      return rec;
    });
  }

  const ClientKeys& keys() const { return keys_; }
  TokenOram& oram() { return oram_; }
  const TokenOram& oram() const { return oram_; }

  // Client state file: params, position map, stash.
  Bytes serialize_state() const {
    ByteWriter w;
    w.raw(std::string_view("OBGC")).u16(1);
    write_params(w, oram_.engine().params());
    const auto& pm = oram_.position_map();
    std::vector<std::pair<Token, Leaf>> sorted(pm.begin(), pm.end());
    std::sort(sorted.begin(), sorted.end());
    w.u64(sorted.size());
    for (const auto& [tk, leaf] : sorted) w.raw(tk.span()).u64(leaf);
    write_stash(w, oram_.engine().stash());
    return std::move(w).take();
  }

  static TrivialClient restore(ClientKeys keys, ByteSpan state, PathStorage& storage, Drbg rng) {
    ByteReader r(state);
    auto magic = r.raw(4);
    if (std::string(magic.begin(), magic.end()) != "OBGC") {
      throw ProtocolError("bad client state magic");
    }
    if (r.u16() != 1) throw ProtocolError("unsupported client state version");
    auto params = read_params(r);
    auto n = r.u64();
    PositionMap pm;
    pm.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      auto tk = Token::from(r.raw(16));
      pm.emplace(tk, r.u64());
    }
    auto stash = read_stash(r);
    r.expect_end();
    return TrivialClient(std::move(keys), params, std::move(pm), std::move(stash), storage,
                         std::move(rng));
  }

 private:
  void check_pair(Vertex u, Vertex v) const {
    if (u >= keys_.vertex_count || v >= keys_.vertex_count) {
      throw RangeError("query vertex out of range [0, " + std::to_string(keys_.vertex_count) + ")");
    }
  }

  ClientKeys keys_;
  Prf prf_;
  TokenOram oram_;
};

// ---------------------------------------------------------------------------
// Enhanced mode

// Session frames between client and controller.
inline constexpr std::size_t kRequestPadWidth = 8;

inline Bytes seal_request(Aead& session, Vertex u, Vertex v, Drbg& rng) {
  return session.encrypt(encode_pair(u, v), kRequestPadWidth, rng);
}

inline Bytes seal_response(Aead& session, const EncryptedPath& resp, Drbg& rng) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(resp.size()));
  for (const auto& ct : resp) w.raw(ct);
  const auto body = std::move(w).take();
  return session.encrypt(body, body.size(), rng);
}

inline EncryptedPath open_response(Aead& session, ByteSpan sealed) {
  auto body = session.decrypt(sealed);
  ByteReader r(body);
  EncryptedPath resp(r.u32());
  if (resp.size() > r.remaining() / kHopCiphertextWidth) throw IntegrityError("bad response length");
  for (auto& ct : resp) {
    auto s = r.raw(kHopCiphertextWidth);
    ct.assign(s.begin(), s.end());
  }
  r.expect_end();
  return resp;
}

// A request that did not decrypt under the session key.
struct SessionAuthError : IntegrityError {
  using IntegrityError::IntegrityError;
};

// The TEE stand-in: holds K2, the session key, the recursive position map and
// all stashes. Only the data tree and level trees live at the server.
class Controller {
 public:
  Controller(Bytes k2, Bytes session_key, std::uint32_t vertex_count, AddressOram oram, Drbg rng)
      : k2_(std::move(k2)),
        session_key_(std::move(session_key)),
        session_(session_key_),
        addresses_{vertex_count},
        oram_(std::move(oram)),
        rng_(std::move(rng)) {}

  std::uint32_t vertex_count() const { return addresses_.vertex_count; }

  EncryptedPath run_query(Vertex u, Vertex v) {
    std::uint64_t curr = addresses_.address(u, v);
    return chase_hops(addresses_.vertex_count, [&]() -> std::optional<HopRecord> {
      auto block = oram_.access(curr);
      if (!block) return std::nullopt;
      auto rec = HopRecord::decode(block->payload);
      curr = index_from_block_id(rec.next);
      if (curr >= addresses_.size()) throw IntegrityError("next-hop address out of range");
      return rec;
    });
  }

  // Session-encrypted (u, v) in, session-encrypted path out. Requests that
  // fail authentication or name bad vertices are rejected before any
  // server access.
  Bytes handle(ByteSpan request) {
    Bytes plain;
    try {
      plain = session_.decrypt(request);
    } catch (const IntegrityError&) {
      throw SessionAuthError("session authentication failed");
    }
    auto [u, v] = decode_pair(plain);
    if (u >= addresses_.vertex_count || v >= addresses_.vertex_count) {
      throw RangeError("query vertex out of range");
    }
    return seal_response(session_, run_query(u, v), rng_);
  }

  AddressOram& oram() { return oram_; }
  const AddressOram& oram() const { return oram_; }

  std::size_t key_bytes() const { return k2_.size() + session_key_.size(); }
  std::size_t resident_bytes() const { return oram_.resident_bytes() + key_bytes(); }

  Bytes serialize_state() const {
    ByteWriter w;
    w.raw(std::string_view("OBGE")).u16(1);
    w.blob(k2_).blob(session_key_).u32(addresses_.vertex_count);
    w.u32(oram_.data().tree_id());
    write_params(w, oram_.data().params());
    write_stash(w, oram_.data().stash());
    oram_.positions().serialize(w);
    return std::move(w).take();
  }

  static Controller restore(ByteSpan state, PathStorage& storage, Drbg rng) {
    ByteReader r(state);
    auto magic = r.raw(4);
    if (std::string(magic.begin(), magic.end()) != "OBGE") {
      throw ProtocolError("bad controller state magic");
    }
    if (r.u16() != 1) throw ProtocolError("unsupported controller state version");
    auto k2b = r.blob();
    Bytes k2(k2b.begin(), k2b.end());
    auto skb = r.blob();
    Bytes session(skb.begin(), skb.end());
    auto n = r.u32();
    auto tree = r.u32();
    auto params = read_params(r);
    auto stash = read_stash(r);
    PathOram data(params, k2, storage, tree, std::move(stash), rng.fork());
    auto positions = RecursivePositionMap::restore(r, k2, storage, rng);
    r.expect_end();
    return Controller(std::move(k2), std::move(session), n,
                      AddressOram(std::move(data), std::move(positions)), std::move(rng));
  }

 private:
  Bytes k2_;
  Bytes session_key_;
  Aead session_;
  AddressScheme addresses_;
  AddressOram oram_;
  Drbg rng_;
};

// Client side of the enhanced channel.
class SessionClient {
 public:
  explicit SessionClient(const ClientKeys& keys, Drbg rng)
      : vertex_count_(keys.vertex_count), session_(keys.session_key), rng_(std::move(rng)) {}

  Bytes request(Vertex u, Vertex v) {
    if (u >= vertex_count_ || v >= vertex_count_) throw RangeError("query vertex out of range");
    return seal_request(session_, u, v, rng_);
  }

  EncryptedPath response(ByteSpan sealed) { return open_response(session_, sealed); }

 private:
  std::uint32_t vertex_count_;
  Aead session_;
  Drbg rng_;
};

// ---------------------------------------------------------------------------
// Setup and Reveal

struct SetupResult {
  ClientKeys client;
  OramParams data_params;
  std::uint64_t spdx_size = 0;
  std::optional<TrivialClient> trivial;
  std::optional<Controller> controller;
};

// Computes the SPDX, tokenizes and encrypts it, builds and uploads the data
// tree (tree 0) and, in enhanced mode, the position-map level trees.
inline SetupResult setup(const Graph& g, const SetupOptions& opts, PathStorage& storage,
                         Drbg& rng) {
  if (g.vertex_count() > std::numeric_limits<std::uint32_t>::max() / 2) {
    throw ConfigError("graph too large");
  }
  const auto n = static_cast<std::uint32_t>(g.vertex_count());
  ClientKeys client{keygen(opts.lambda, rng), {}, n, opts.mode};
  if (opts.mode == Mode::enhanced) client.session_key = random_key(opts.lambda, rng);

  const auto spdx = compute_spdx(g);
  const auto slots = required_slots(opts.pad, n, spdx.size());
  Aead k1(client.keys.k1);
  Prf prf(client.keys.kprf);

  SetupResult out{client, data_params(slots, opts.bucket_size, opts.stash_max), spdx.size(), {}, {}};
  if (opts.mode == Mode::trivial) {
    std::vector<TokenBlock> blocks;
    blocks.reserve(spdx.size());
    for (const auto& e : spdx) {
      blocks.push_back(
          TokenBlock{prf.eval(e.u, e.v), prf.eval(e.next, e.v), detail::encrypt_pair(k1, e.next, e.v, rng)});
    }
    auto state = oram_init(blocks, opts.bucket_size, slots, client.keys.k2, rng, opts.stash_max);
    storage.upload_tree(kDataTree, state.tree);
    out.trivial.emplace(client, state.params, std::move(state.pm), std::move(state.stash), storage,
                        rng.fork());
    return out;
  }

  const AddressScheme addr{n};
  const auto& params = out.data_params;
  std::vector<Leaf> assignments(addr.size(), kAbsent);
  std::vector<Block> blocks;
  blocks.reserve(spdx.size());
  for (const auto& e : spdx) {
    const auto a = addr.address(e.u, e.v);
    const Leaf x = rng.uniform(params.leaf_count());
    assignments[a] = x;
    HopRecord rec{block_id_from_index(addr.address(e.next, e.v)),
                  detail::encrypt_pair(k1, e.next, e.v, rng)};
    blocks.push_back(Block{block_id_from_index(a), x, rec.encode()});
  }
  auto built = build_tree(params, blocks, client.keys.k2, rng);
  storage.upload_tree(kDataTree, built.tree);
  blocks.clear();

  RecursiveConfig rcfg{opts.chi, opts.budget_bytes, opts.bucket_size, opts.stash_max, kDataTree + 1};
  auto positions = RecursivePositionMap::build(std::move(assignments), params.leaf_count(), rcfg,
                                               client.keys.k2, storage, rng);
  PathOram data(params, client.keys.k2, storage, kDataTree, std::move(built.stash), rng.fork());
  out.controller.emplace(client.keys.k2, client.session_key, n,
                         AddressOram(std::move(data), std::move(positions)), rng.fork());
  return out;
}

// Decrypts the hop records into the vertex sequence starting at u. An empty
// response means no path when u != v and the empty path when u == v.
inline std::optional<PlainPath> reveal(const EncryptedPath& resp, Vertex u, Vertex v,
                                       ByteSpan k1) {
  if (resp.empty()) {
    if (u == v) return PlainPath{};
    return std::nullopt;
  }
  Aead aead(k1);
  PlainPath path{u};
  for (const auto& ct : resp) {
    auto [w, dest] = decode_pair(aead.decrypt(ct));
    if (dest != v) throw IntegrityError("hop record names a different destination");
    path.push_back(w);
  }
  if (path.back() != v) throw IntegrityError("path does not end at the destination");
  return path;
}

}  // namespace obge
