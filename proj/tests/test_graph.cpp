#include <gtest/gtest.h>

#include "gmcf/errors.hpp"
#include "gmcf/graph.hpp"

namespace gmcf {
namespace {

struct Fixture {
  std::vector<AttributeId> users, items, universe;
  EmbeddingTable table;

  Fixture(std::size_t n_user, std::size_t n_item) {
    std::uint32_t id = 0;
    for (std::size_t k = 0; k < n_user; ++k) users.push_back({id++, Side::kUser});
    for (std::size_t k = 0; k < n_item; ++k) items.push_back({id++, Side::kItem});
    universe = users;
    universe.insert(universe.end(), items.begin(), items.end());
    table = init_embeddings(universe, 4, 11);
  }

  DataSample sample() const {
    DataSample s;
    for (const auto& u : users) s.user.push_back({u, 1.0});
    for (const auto& i : items) s.item.push_back({i, 2.0});
    s.label = 1.0;
    return s;
  }
};

TEST(BuildGraphs, NodeAndEdgeCounts) {
  Fixture f(3, 2);
  const auto [g_user, g_item] = build_graphs(f.sample(), f.table);
  EXPECT_EQ(g_user.node_count(), 3u);
  EXPECT_EQ(g_user.edge_count(), 3u);
  EXPECT_EQ(g_item.node_count(), 2u);
  EXPECT_EQ(g_item.edge_count(), 1u);
  EXPECT_EQ(g_user.side, Side::kUser);
  EXPECT_EQ(g_item.side, Side::kItem);
}

TEST(BuildGraphs, SingleNode) {
  Fixture f(1, 4);
  const auto [g_user, g_item] = build_graphs(f.sample(), f.table);
  EXPECT_EQ(g_user.node_count(), 1u);
  EXPECT_EQ(g_user.edge_count(), 0u);
  EXPECT_TRUE(g_user.neighbors(0).empty());
  EXPECT_EQ(g_item.edge_count(), 6u);
}

TEST(BuildGraphs, CompleteNeighborhoods) {
  Fixture f(5, 1);
  const auto [g_user, g_item] = build_graphs(f.sample(), f.table);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto n = g_user.neighbors(i);
    EXPECT_EQ(n.size(), 4u);
    EXPECT_EQ(std::count(n.begin(), n.end(), i), 0);
  }
}

TEST(BuildGraphs, RepresentationsAndOrder) {
  Fixture f(2, 2);
  const auto [g_user, g_item] = build_graphs(f.sample(), f.table);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(g_item.nodes[k].att, f.items[k]);
    EXPECT_EQ(g_item.nodes[k].val, 2.0);
    const auto v = f.table.at(f.items[k]).values();
    for (std::size_t j = 0; j < v.size(); ++j) EXPECT_EQ(g_item.nodes[k].repr[j], 2.0 * v[j]);
  }
}

TEST(BuildGraphs, Pure) {
  Fixture f(3, 3);
  const auto a = build_graphs(f.sample(), f.table);
  const auto b = build_graphs(f.sample(), f.table);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(a.first.nodes[k].repr, b.first.nodes[k].repr);
}

TEST(BuildGraphs, MissingEmbedding) {
  Fixture f(1, 1);
  DataSample s = f.sample();
  s.item.push_back({{99, Side::kItem}, 1.0});
  EXPECT_THROW(build_graphs(s, f.table), MissingEmbeddingError);
}

TEST(BuildGraphs, RejectsDuplicateAttributes) {
  Fixture f(2, 1);
  DataSample s = f.sample();
  s.user.push_back(s.user.front());
  EXPECT_THROW(build_graphs(s, f.table), ContractError);
}

}  // namespace
}  // namespace gmcf
