#pragma once

// Self-checks on random small instances: gradient correctness against finite
// differences and the factorization-machine reduction against its oracle.

#include <cstddef>
#include <cstdint>

#include "gmcf/autodiff.hpp"
#include "gmcf/core.hpp"
#include "gmcf/model.hpp"
#include "gmcf/variant_config.hpp"

namespace gmcf {

struct RandomInstance {
  Vocabulary vocab;
  ModelParams params;
  std::vector<DataSample> batch;  // two samples over the same attributes, labels 1 and 0
};

// 1..max_attrs attributes per side with values drawn from [0.5, 1.5].
RandomInstance random_instance(std::size_t dim, std::size_t max_attrs, const VariantConfig& variant,
                               std::uint64_t seed, std::size_t mlp_depth = 1);

struct GradcheckOptions {
  std::size_t dim = 8;
  std::size_t max_attrs = 4;
  std::size_t mlp_depth = 1;
  double step = 1e-5;
  double lambda = 1e-3;
  VariantConfig variant;
};

// Checks the gradient of the regularized risk over every parameter.
GradientCheckResult gradcheck_instance(const GradcheckOptions& options, std::uint64_t seed);

struct FmcheckResult {
  double max_abs_deviation = 0.0;
  double max_abs_prediction = 0.0;
  std::size_t instances = 0;
};

// Compares fm_reduction_predict with fm_predict on n random instances.
FmcheckResult fmcheck(std::size_t n, std::size_t dim, std::size_t max_attrs, std::uint64_t seed);

}  // namespace gmcf
