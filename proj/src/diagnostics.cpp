#include "gmcf/diagnostics.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gmcf/errors.hpp"
#include "gmcf/random.hpp"
#include "gmcf/training.hpp"
#include "gmcf/variants.hpp"

namespace gmcf {

RandomInstance random_instance(std::size_t dim, std::size_t max_attrs, const VariantConfig& variant,
                               std::uint64_t seed, std::size_t mlp_depth) {
  if (max_attrs == 0) throw ConfigError("random_instance: max_attrs must be at least 1");
  Rng rng(seed);
  RandomInstance inst;
  const std::size_t n_user = 1 + rng.below(max_attrs);
  const std::size_t n_item = 1 + rng.below(max_attrs);
  DataSample pos, neg;
  for (std::size_t k = 0; k < n_user; ++k) {
    const AttributeId att = inst.vocab.intern(Side::kUser, fmt::format("u{}", k));
    pos.user.push_back({att, rng.uniform(0.5, 1.5)});
    neg.user.push_back({att, rng.uniform(0.5, 1.5)});
  }
  for (std::size_t k = 0; k < n_item; ++k) {
    const AttributeId att = inst.vocab.intern(Side::kItem, fmt::format("i{}", k));
    pos.item.push_back({att, rng.uniform(0.5, 1.5)});
    neg.item.push_back({att, rng.uniform(0.5, 1.5)});
  }
  pos.label = 1.0;
  neg.label = 0.0;
  inst.batch = {pos, neg};
  const auto universe = inst.vocab.universe();
  inst.params = ModelParams::create(universe, ModelShape{dim, mlp_depth}, variant, rng.next());
  return inst;
}

GradientCheckResult gradcheck_instance(const GradcheckOptions& options, std::uint64_t seed) {
  RandomInstance inst = random_instance(options.dim, options.max_attrs, options.variant, seed, options.mlp_depth);
  auto registry = inst.params.registry();
  const ModelParams& params = inst.params;
  const auto& batch = inst.batch;
  const double lambda = options.lambda;
  return gradient_check([&](Tape& tape) { return regularized_risk(tape, batch, params, lambda).risk; }, registry,
                        options.step);
}

FmcheckResult fmcheck(std::size_t n, std::size_t dim, std::size_t max_attrs, std::uint64_t seed) {
  FmcheckResult result;
  const VariantConfig fm = VariantConfig::fm_reduction();
  for (std::size_t k = 0; k < n; ++k) {
    const RandomInstance inst = random_instance(dim, max_attrs, fm, seed * 1000003 + k);
    for (const auto& sample : inst.batch) {
      const double oracle = fm_predict(sample, inst.params.embeddings);
      const double reduced = fm_reduction_predict(sample, inst.params.embeddings);
      if (!std::isfinite(oracle) || !std::isfinite(reduced)) throw NumericError("fmcheck: non-finite prediction");
      result.max_abs_deviation = std::max(result.max_abs_deviation, std::abs(reduced - oracle));
      result.max_abs_prediction = std::max(result.max_abs_prediction, std::abs(oracle));
    }
    ++result.instances;
  }
  return result;
}

}  // namespace gmcf
