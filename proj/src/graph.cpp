#include "gmcf/graph.hpp"

#include "gmcf/errors.hpp"

namespace gmcf {

std::vector<std::size_t> AttributeGraph::neighbors(std::size_t i) const {
  if (i >= nodes.size()) throw ContractError("neighbors: node index out of range");
  std::vector<std::size_t> out;
  out.reserve(nodes.size() - 1);
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    if (j != i) out.push_back(j);
  }
  return out;
}

AttributeGraph build_graph(Side side, std::span<const AttributeValuePair> chars, const EmbeddingTable& table) {
  AttributeGraph g;
  g.side = side;
  g.nodes.reserve(chars.size());
  for (const auto& pair : chars) {
    g.nodes.push_back({pair.att, pair.val, node_representation(pair, table)});
  }
  return g;
}

std::pair<AttributeGraph, AttributeGraph> build_graphs(const DataSample& sample, const EmbeddingTable& table) {
  validate_sample(sample);
  return {build_graph(Side::kUser, sample.user, table), build_graph(Side::kItem, sample.item, table)};
}

}  // namespace gmcf
