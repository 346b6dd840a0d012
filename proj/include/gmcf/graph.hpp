#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "gmcf/core.hpp"

namespace gmcf {

struct GraphNode {
  AttributeId att;
  double val = 1.0;
  std::vector<double> repr;  // u = val * v_att
};

// Complete graph over one side's attribute-value pairs. Edges are implicit:
// every unordered pair of distinct nodes interacts, and there are no
// self-loops.
struct AttributeGraph {
  Side side = Side::kUser;
  std::vector<GraphNode> nodes;

  std::size_t node_count() const noexcept { return nodes.size(); }
  std::size_t edge_count() const noexcept { return nodes.size() * (nodes.size() - 1) / 2; }
  // N(i): every other node index, in node order.
  std::vector<std::size_t> neighbors(std::size_t i) const;
};

AttributeGraph build_graph(Side side, std::span<const AttributeValuePair> chars, const EmbeddingTable& table);

// (user graph, item graph); node order follows the sample's attribute order.
std::pair<AttributeGraph, AttributeGraph> build_graphs(const DataSample& sample, const EmbeddingTable& table);

}  // namespace gmcf
