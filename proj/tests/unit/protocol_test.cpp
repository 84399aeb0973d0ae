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

#include <gtest/gtest.h>

#include "obge/net.hpp"
#include "obge/protocol.hpp"
#include "support/oracles.hpp"

namespace obge {
namespace {

using testing::four_vertex_instance;

SetupOptions opts(Mode m, std::size_t budget = std::numeric_limits<std::size_t>::max()) {
  SetupOptions o;
  o.mode = m;
  o.budget_bytes = budget;
  return o;
}

TEST(Setup, FourVertexTrivialPositionMap) {
  Drbg rng(1);
  TreeStore store;
  auto res = setup(four_vertex_instance(), opts(Mode::trivial), store, rng);
  ASSERT_TRUE(res.trivial);
  EXPECT_EQ(res.trivial->oram().position_map().size(), testing::connected_pairs(four_vertex_instance()));
  EXPECT_EQ(res.trivial->oram().position_map().size(), 6u);
  EXPECT_EQ(res.spdx_size, 6u);
}

TEST(Setup, FullPaddingSizesForAllPairs) {
  Drbg rng(2);
  TreeStore store;
  auto o = opts(Mode::trivial);
  o.pad = PadMode::full;
  auto res = setup(four_vertex_instance(), o, store, rng);
  EXPECT_GE(std::uint64_t{o.bucket_size} << res.data_params.depth, 12u);
}

TEST(Query, FourVertexHopChase) {
  for (auto mode : {Mode::trivial, Mode::enhanced}) {
    Drbg rng(3);
    LocalDeployment d(four_vertex_instance(), opts(mode, 16), rng);
    auto resp = d.query(0, 3);
    ASSERT_EQ(resp.size(), 2u);
    Aead k1(d.keys().keys.k1);
    EXPECT_EQ(decode_pair(k1.decrypt(resp[0])), (std::pair<Vertex, Vertex>{2, 3}));
    EXPECT_EQ(decode_pair(k1.decrypt(resp[1])), (std::pair<Vertex, Vertex>{3, 3}));
    EXPECT_EQ(reveal(resp, 0, 3, d.keys().keys.k1), (PlainPath{0, 2, 3}));
    EXPECT_TRUE(d.query(2, 2).empty());
    EXPECT_TRUE(d.query(3, 0).empty());
    EXPECT_EQ(d.path(2, 2), PlainPath{});
    EXPECT_FALSE(d.path(3, 0));
    EXPECT_THROW(d.query(0, 4), RangeError);
  }
}

TEST(Query, RoundsArePathLengthPlusOne) {
  for (auto mode : {Mode::trivial, Mode::enhanced}) {
    Drbg rng(4);
    auto g = four_vertex_instance();
    LocalDeployment d(g, opts(mode, 16), rng);
    for (Vertex u = 0; u < 4; ++u) {
      for (Vertex v = 0; v < 4; ++v) {
        const auto before = d.trace().records().size();
        auto p = d.path(u, v);
        auto recs = d.trace().records();
        std::size_t reads = 0, writes = 0;
        for (auto i = before; i < recs.size(); ++i) {
          if (recs[i].tree != kDataTree) continue;
          reads += recs[i].type == MsgType::ReadPath;
          writes += recs[i].type == MsgType::WritePath;
        }
        const std::size_t hops = p && !p->empty() ? p->size() - 1 : 0;
        EXPECT_EQ(reads, hops + 1) << to_string(mode) << " " << u << "," << v;
        EXPECT_EQ(writes, hops + 1);
      }
    }
  }
}

TEST(Query, EmptyGraphAnswersEmpty) {
  for (auto mode : {Mode::trivial, Mode::enhanced}) {
    Drbg rng(5);
    LocalDeployment d(Graph(3, true), opts(mode), rng);
    EXPECT_EQ(d.spdx_size(), 0u);
    for (Vertex u = 0; u < 3; ++u) {
      for (Vertex v = 0; v < 3; ++v) {
        EXPECT_TRUE(d.query(u, v).empty());
        EXPECT_EQ(d.path(u, v).has_value(), u == v);
      }
    }
  }
}

TEST(Reveal, TamperedCiphertextFails) {
  Drbg rng(6);
  LocalDeployment d(four_vertex_instance(), opts(Mode::trivial), rng);
  auto resp = d.query(0, 3);
  resp[0][20] ^= 0x40;
  EXPECT_THROW(reveal(resp, 0, 3, d.keys().keys.k1), IntegrityError);
  auto other = d.query(0, 3);
  EXPECT_THROW(reveal(other, 0, 2, d.keys().keys.k1), IntegrityError);
}

TEST(Modes, IdenticalPathsOnRandomGraphs) {
  Drbg gen(7);
  for (int t = 0; t < 6; ++t) {
    const std::size_t n = 5 + gen.uniform(30);
    auto g = testing::random_digraph(n, 2.5 / n, gen, t % 2 ? 5 : 1);
    Drbg r1(100 + t), r2(200 + t);
    LocalDeployment a(g, opts(Mode::trivial), r1);
    LocalDeployment b(g, opts(Mode::enhanced, flat_position_map_bytes(n) / 16), r2);
    for (Vertex u = 0; u < n; ++u) {
      auto oracle = spath_oracle_from(g, u);
      for (Vertex v = 0; v < n; ++v) {
        ASSERT_EQ(a.path(u, v), oracle[v]);
        ASSERT_EQ(b.path(u, v), oracle[v]);
      }
    }
  }
}

TEST(Controller, BadSessionFrameRejectedBeforeAnyAccess) {
  Drbg rng(8);
  LocalDeployment d(four_vertex_instance(), opts(Mode::enhanced), rng);
  const auto before = d.trace().records().size();
  auto reply = decode_message(d.link().roundtrip(encode_message(EnclaveRequest{Bytes(40, 7)})));
  auto* err = std::get_if<ErrorReply>(&reply);
  ASSERT_NE(err, nullptr);
  EXPECT_EQ(err->code, ErrorCode::Session);
  for (auto i = before; i < d.trace().records().size(); ++i) {
    auto t = d.trace().records()[i].type;
    EXPECT_NE(t, MsgType::ReadPath);
    EXPECT_NE(t, MsgType::WritePath);
  }
  // Out-of-range vertex under a valid session: range error, no access.
  Aead session(d.keys().session_key);
  auto req = seal_request(session, 0, 9, rng);
  const auto mid = d.trace().records().size();
  reply = decode_message(d.link().roundtrip(encode_message(EnclaveRequest{req})));
  ASSERT_TRUE(std::holds_alternative<ErrorReply>(reply));
  EXPECT_EQ(std::get<ErrorReply>(reply).code, ErrorCode::Range);
  for (auto i = mid; i < d.trace().records().size(); ++i) {
    EXPECT_NE(d.trace().records()[i].type, MsgType::ReadPath);
  }
}

TEST(Controller, RequestWidthIndependentOfPair) {
  Drbg rng(9);
  ClientKeys k{keygen(128, rng), random_key(128, rng), 1000, Mode::enhanced};
  SessionClient c(k, rng.fork());
  const auto w = c.request(0, 0).size();
  EXPECT_EQ(c.request(999, 3).size(), w);
  EXPECT_NE(c.request(1, 2), c.request(1, 2));
}

TEST(Persistence, TrivialClientAndControllerStateRoundTrip) {
  auto g = four_vertex_instance();
  {
    Drbg rng(10);
    TreeStore store;
    auto res = setup(g, opts(Mode::trivial), store, rng);
    res.trivial->query(0, 3);
    auto state = res.trivial->serialize_state();
    auto keys = ClientKeys::parse(res.client.serialize());
    EXPECT_EQ(keys.keys, res.client.keys);
    auto back = TrivialClient::restore(keys, state, store, Drbg(1));
    EXPECT_EQ(reveal(back.query(0, 3), 0, 3, keys.keys.k1), (PlainPath{0, 2, 3}));
    EXPECT_THROW(TrivialClient::restore(keys, Bytes(3), store, Drbg(1)), ProtocolError);
  }
  {
    Drbg rng(11);
    TreeStore store;
    auto res = setup(g, opts(Mode::enhanced, 16), store, rng);
    res.controller->run_query(0, 3);
    auto state = res.controller->serialize_state();
    auto back = Controller::restore(state, store, Drbg(2));
    for (Vertex u = 0; u < 4; ++u)
      for (Vertex v = 0; v < 4; ++v)
        EXPECT_EQ(reveal(back.run_query(u, v), u, v, res.client.keys.k1), spath_oracle(g, u, v));
  }
}

TEST(KeyFile, RejectsGarbage) {
  EXPECT_THROW(ClientKeys::parse(Bytes{1, 2, 3}), ProtocolError);
}

}  // namespace
}  // namespace obge
