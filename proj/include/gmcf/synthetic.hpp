#pragma once

// Planted-rule synthetic data.
//
// Every user has an id, a category c, two binary attributes (a, b) and some
// noise attributes; every item has an id, a genre g, a binary polarity p and
// some noise attributes. The clean score of (user, item) is
//   cross: A[c][g]
//   inner: w * (a xor b ? 1 : -1) * (p ? 1 : -1)
//   mixed: the sum of both
// with A drawn uniformly from [-1.5, 1.5]. The clean label is score > 0; with
// probability `noise` it is replaced by a fair coin flip.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gmcf/core.hpp"

namespace gmcf {

enum class PlantedRule { kCross, kInner, kMixed };

PlantedRule parse_rule(std::string_view text);
const char* rule_name(PlantedRule rule) noexcept;

struct SyntheticSpec {
  std::size_t users = 500;
  std::size_t items = 300;
  std::size_t samples_per_user = 20;  // distinct items per user
  std::size_t user_categories = 8;
  std::size_t item_categories = 8;
  std::size_t user_noise_attributes = 1;
  std::size_t item_noise_attributes = 1;
  std::size_t noise_cardinality = 4;
  PlantedRule rule = PlantedRule::kMixed;
  double inner_weight = 1.0;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

// Latent assignments and the rule, enough to recompute every clean score.
struct PlantedModel {
  SyntheticSpec spec;
  std::vector<std::vector<double>> affinity;  // user_categories x item_categories
  std::vector<std::size_t> user_category;
  std::vector<int> user_a, user_b;
  std::vector<std::size_t> item_category;
  std::vector<int> item_polarity;

  double clean_score(std::size_t user, std::size_t item) const;
  // Human-readable dump for the sidecar file.
  std::string describe() const;
};

struct SyntheticData {
  Dataset dataset;
  PlantedModel model;
  // Per sample: the (user, item) indices and the clean score it was built from.
  std::vector<std::size_t> user_index;
  std::vector<std::size_t> item_index;
  std::vector<double> clean_scores;
};

// Throws ConfigError for a non-positive size, samples_per_user > items or
// noise outside [0, 1]. Same spec, same data.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace gmcf
