#pragma once

// Ablation variants and the factorization-machine reduction.

#include <span>

#include "gmcf/core.hpp"
#include "gmcf/model.hpp"
#include "gmcf/variant_config.hpp"

namespace gmcf {

// Runs the forward pass under `config`. The parameters must contain every
// component the config needs; unused components are ignored.
ForwardResult apply_variant(const VariantConfig& config, const ModelParams& params, const DataSample& sample);

// FM prediction without bias over the union node set:
//   sum_i w_i val_i + sum_{i<j} <v_i, v_j> val_i val_j
// with w_i = sum(v_i) unless explicit weights (indexed by attribute id) are
// given. Evaluated directly; independent of the graph pipeline.
double fm_predict(const DataSample& sample, const EmbeddingTable& table);
double fm_predict(const DataSample& sample, const EmbeddingTable& table, std::span<const double> weights);

// The reduced pipeline: element-wise products for every interaction over the
// union graph, fuse u_i + 1/2 sum_j s_ij, match sum(v_user) + sum(v_item).
// Equals fm_predict up to rounding.
double fm_reduction_predict(const DataSample& sample, const EmbeddingTable& table);

}  // namespace gmcf
