#include "gmcf/variants.hpp"

#include "gmcf/errors.hpp"

namespace gmcf {

ForwardResult apply_variant(const VariantConfig& config, const ModelParams& params, const DataSample& sample) {
  Tape tape;
  return to_result(forward(tape, params, sample, config));
}

double fm_predict(const DataSample& sample, const EmbeddingTable& table, std::span<const double> weights) {
  validate_sample(sample);
  std::vector<AttributeValuePair> all(sample.user);
  all.insert(all.end(), sample.item.begin(), sample.item.end());

  double linear = 0.0;
  for (const auto& p : all) {
    if (p.att.id >= weights.size()) throw MissingEmbeddingError("no FM weight for attribute " + std::to_string(p.att.id));
    linear += weights[p.att.id] * p.val;
  }
  double pairwise = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto vi = table.at(all[i].att).values();
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      auto vj = table.at(all[j].att).values();
      double inner = 0.0;
      for (std::size_t k = 0; k < vi.size(); ++k) inner += vi[k] * vj[k];
      pairwise += inner * all[i].val * all[j].val;
    }
  }
  return linear + pairwise;
}

double fm_predict(const DataSample& sample, const EmbeddingTable& table) {
  std::vector<double> weights(table.slots(), 0.0);
  for (const auto& side : {std::span<const AttributeValuePair>(sample.user), std::span<const AttributeValuePair>(sample.item)}) {
    for (const auto& p : side) {
      double w = 0.0;
      for (double x : table.at(p.att).values()) w += x;
      weights[p.att.id] = w;
    }
  }
  return fm_predict(sample, table, weights);
}

double fm_reduction_predict(const DataSample& sample, const EmbeddingTable& table) {
  ModelParams params;
  params.variant = VariantConfig::fm_reduction();
  params.shape.dim = table.dim();
  params.embeddings = table;
  Tape tape;
  return forward(tape, params, sample).score.scalar();
}

}  // namespace gmcf
