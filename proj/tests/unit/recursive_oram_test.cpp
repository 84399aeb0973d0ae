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

#include "obge/protocol.hpp"
#include "obge/recursive_oram.hpp"
#include "obge/stats.hpp"
#include "support/oracles.hpp"

namespace obge {
namespace {

struct Fixture {
  Drbg rng{21};
  Bytes key = random_key(128, rng);
  TreeStore store;
};

std::vector<Leaf> random_assignments(std::size_t n, std::uint64_t leaves, double absent, Drbg& rng) {
  std::vector<Leaf> a(n);
  for (auto& x : a) {
    x = rng.uniform(1000) < absent * 1000 ? kAbsent : rng.uniform(leaves);
  }
  return a;
}

TEST(AddressScheme, DenseAndInjective) {
  AddressScheme s{7};
  EXPECT_EQ(s.size(), 49u);
  EXPECT_EQ(s.address(2, 5), 19u);
  EXPECT_EQ(s.pair(19), (std::pair<Vertex, Vertex>{2, 5}));
  EXPECT_THROW(s.address(7, 0), RangeError);
}

TEST(Build, ChainDepthOneAtOneKilobyte) {
  Fixture f;
  RecursiveConfig cfg{64, 1024, 5, 128, 1};
  auto m = RecursivePositionMap::build(random_assignments(4096, 1024, 0, f.rng), 1024, cfg, f.key,
                                       f.store, f.rng);
  EXPECT_EQ(m.depth(), 1u);
  EXPECT_EQ(m.top().size(), 64u);
  EXPECT_EQ(m.top_bytes(), 512u);
  EXPECT_LE(m.top_bytes(), 1024u);
  EXPECT_TRUE(f.store.has_tree(1));
  EXPECT_FALSE(f.store.has_tree(2));
  // 64 blocks of 512 B: 13 leaves needed at Z=5, so 16.
  EXPECT_EQ(m.levels()[0].params().depth, 4u);
}

TEST(Build, FlatWhenBudgetCoversEverything) {
  Fixture f;
  RecursiveConfig cfg{64, 4096 * 8, 5, 128, 1};
  auto m = RecursivePositionMap::build(random_assignments(4096, 1024, 0, f.rng), 1024, cfg, f.key,
                                       f.store, f.rng);
  EXPECT_EQ(m.depth(), 0u);
  EXPECT_TRUE(f.store.tree_ids().empty());
}

TEST(Build, ConfigErrors) {
  Fixture f;
  RecursiveConfig chi1{1, 1024, 5, 128, 1};
  EXPECT_THROW(RecursivePositionMap::build(std::vector<Leaf>(16, 0), 4, chi1, f.key, f.store, f.rng),
               ConfigError);
  RecursiveConfig tiny{64, 4, 5, 128, 1};
  EXPECT_THROW(RecursivePositionMap::build(std::vector<Leaf>(16, 0), 4, tiny, f.key, f.store, f.rng),
               ConfigError);
}

// get_and_remap agrees with a flat map updated in lockstep, at several
// chain depths.
TEST(GetAndRemap, ShadowFlatMapEquivalence) {
  for (std::size_t budget : {1u << 20, 1024u, 64u, 8u}) {
    Fixture f;
    const std::uint64_t leaves = 256;
    auto assign = random_assignments(3000, leaves, 0.3, f.rng);
    auto shadow = assign;
    RecursiveConfig cfg{16, budget, 5, 128, 1};
    auto m = RecursivePositionMap::build(assign, leaves, cfg, f.key, f.store, f.rng);
    for (int i = 0; i < 2000; ++i) {
      const auto a = f.rng.uniform(shadow.size());
      auto [old, fresh] = m.get_and_remap(a);
      ASSERT_EQ(old, shadow[a]) << "budget " << budget << " step " << i;
      ASSERT_LT(fresh, leaves);
      if (shadow[a] != kAbsent) shadow[a] = fresh;
    }
    EXPECT_LE(m.top_bytes(), budget);
  }
}

TEST(GetAndRemap, TwiceChainsLeaves) {
  Fixture f;
  RecursiveConfig cfg{64, 1024, 5, 128, 1};
  auto m = RecursivePositionMap::build(random_assignments(4096, 1024, 0, f.rng), 1024, cfg, f.key,
                                       f.store, f.rng);
  auto [x, x1] = m.get_and_remap(100);
  auto [y, x2] = m.get_and_remap(100);
  EXPECT_EQ(y, x1);
  EXPECT_LT(x2, 1024u);
  EXPECT_THROW(m.get_and_remap(4096), RangeError);
}

TEST(AddressOram, FourVertexShadowEquivalence) {
  auto g = testing::four_vertex_instance();
  Drbg rng(31);
  auto key = random_key(128, rng);
  AddressScheme addr{4};
  auto spdx = compute_spdx(g);
  auto params = data_params(spdx.size(), 5, 128);
  std::vector<Leaf> assign(addr.size(), kAbsent);
  std::vector<Block> blocks;
  for (const auto& e : spdx) {
    auto a = addr.address(e.u, e.v);
    assign[a] = rng.uniform(params.leaf_count());
    blocks.push_back(Block{block_id_from_index(a), assign[a], Bytes(params.payload_width, 0)});
  }
  TreeStore store;
  auto built = build_tree(params, blocks, key, rng);
  store.upload_tree(0, built.tree);
  RecursiveConfig cfg{2, 16, 5, 128, 1};
  auto pm = RecursivePositionMap::build(assign, params.leaf_count(), cfg, key, store, rng);
  EXPECT_GE(pm.depth(), 2u);
  PathOram data(params, key, store, 0, built.stash, rng.fork());
  AddressOram oram(std::move(data), std::move(pm));
  for (int round = 0; round < 20; ++round) {
    for (Vertex u = 0; u < 4; ++u) {
      for (Vertex v = 0; v < 4; ++v) {
        const auto a = addr.address(u, v);
        const auto reads = store.trace().size();
        auto b = oram.access(a);
        EXPECT_EQ(b.has_value(), spdx.find(u, v).has_value());
        if (b) {
          EXPECT_EQ(index_from_block_id(b->id), a);
        }
        // Two records (read + data) per tree touched: every level plus data.
        EXPECT_EQ(store.trace().size() - reads, 2 * (oram.positions().depth() + 1) * 2);
      }
    }
  }
  for (const auto& [b, node] : decrypt_tree(store.snapshot(0), params, key)) {
    EXPECT_TRUE(node_on_leaf_path(node, b.leaf, params.depth));
  }
}

TEST(AddressOram, ResidentBytesWithinBudgetPlusOneBlock) {
  Drbg rng(41);
  auto g = testing::random_digraph(40, 0.1, rng);
  TreeStore store;
  SetupOptions o;
  o.mode = Mode::enhanced;
  o.budget_bytes = flat_position_map_bytes(40) / 16;
  auto res = setup(g, o, store, rng);
  auto& c = *res.controller;
  const auto limit = o.budget_bytes + c.oram().largest_slot_width();
  EXPECT_GE(c.oram().positions().depth(), 1u);
  for (int i = 0; i < 3000; ++i) {
    c.run_query(static_cast<Vertex>(rng.uniform(40)), static_cast<Vertex>(rng.uniform(40)));
    ASSERT_LE(c.oram().resident_bytes(), limit);
  }
}

TEST(AddressOram, EveryLevelObservesUniformLeaves) {
  Drbg rng(51);
  const std::uint64_t n = 4096;
  auto assign = random_assignments(n, 64, 0, rng);
  TreeStore store;
  auto key = random_key(128, rng);
  RecursiveConfig cfg{8, 64, 5, 128, 1};
  auto m = RecursivePositionMap::build(assign, 64, cfg, key, store, rng);
  ASSERT_GE(m.depth(), 2u);
  for (int i = 0; i < 8000; ++i) m.get_and_remap(rng.uniform(n));
  std::map<TreeId, std::vector<std::uint64_t>> leaves;
  for (const auto& r : store.trace().records()) {
    if (r.type == MsgType::ReadPath) leaves[*r.tree].push_back(*r.leaf);
  }
  for (const auto& [tree, ls] : leaves) {
    const auto cells = std::uint64_t{1} << store.snapshot(tree).depth();
    auto bins = stats::bins_for(ls.size(), cells, 20);
    EXPECT_GE(stats::chi_square_uniform(stats::bin_leaves(ls, cells, bins)).p_value, 0.01)
        << "tree " << tree;
  }
}

}  // namespace
}  // namespace obge
