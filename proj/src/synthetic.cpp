#include "gmcf/synthetic.hpp"

#include <numeric>

#include <fmt/format.h>

#include "gmcf/errors.hpp"
#include "gmcf/random.hpp"

namespace gmcf {

PlantedRule parse_rule(std::string_view text) {
  if (text == "cross") return PlantedRule::kCross;
  if (text == "inner") return PlantedRule::kInner;
  if (text == "mixed") return PlantedRule::kMixed;
  throw ConfigError(fmt::format("unknown planted rule '{}' (expected cross, inner or mixed)", text));
}

const char* rule_name(PlantedRule rule) noexcept {
  switch (rule) {
    case PlantedRule::kCross: return "cross";
    case PlantedRule::kInner: return "inner";
    case PlantedRule::kMixed: return "mixed";
  }
  return "?";
}

double PlantedModel::clean_score(std::size_t user, std::size_t item) const {
  const double cross = affinity.at(user_category.at(user)).at(item_category.at(item));
  const double xor_sign = (user_a.at(user) ^ user_b.at(user)) ? 1.0 : -1.0;
  const double inner = spec.inner_weight * xor_sign * (item_polarity.at(item) ? 1.0 : -1.0);
  switch (spec.rule) {
    case PlantedRule::kCross: return cross;
    case PlantedRule::kInner: return inner;
    case PlantedRule::kMixed: return cross + inner;
  }
  return 0.0;
}

std::string PlantedModel::describe() const {
  std::string out;
  out += fmt::format("rule={}\nnoise={}\ninner_weight={}\nseed={}\n", rule_name(spec.rule), spec.noise,
                     spec.inner_weight, spec.seed);
  out += fmt::format("users={} items={} samples_per_user={}\n", spec.users, spec.items, spec.samples_per_user);
  out += "# affinity[uc][ic]\n";
  for (const auto& row : affinity) {
    for (std::size_t g = 0; g < row.size(); ++g) out += fmt::format("{}{:.6f}", g ? "\t" : "", row[g]);
    out += '\n';
  }
  out += "# user category a b\n";
  for (std::size_t u = 0; u < user_category.size(); ++u) {
    out += fmt::format("user_{}\t{}\t{}\t{}\n", u, user_category[u], user_a[u], user_b[u]);
  }
  out += "# item category polarity\n";
  for (std::size_t i = 0; i < item_category.size(); ++i) {
    out += fmt::format("item_{}\t{}\t{}\n", i, item_category[i], item_polarity[i]);
  }
  return out;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.users == 0 || spec.items == 0 || spec.samples_per_user == 0) {
    throw ConfigError("synthetic: users, items and samples per user must be positive");
  }
  if (spec.user_categories == 0 || spec.item_categories == 0 || spec.noise_cardinality == 0) {
    throw ConfigError("synthetic: category counts must be positive");
  }
  if (spec.samples_per_user > spec.items) {
    throw ConfigError(fmt::format("synthetic: {} samples per user exceed {} items", spec.samples_per_user, spec.items));
  }
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) throw ConfigError("synthetic: noise must lie in [0, 1]");

  Rng rng(spec.seed);
  SyntheticData out;
  PlantedModel& m = out.model;
  m.spec = spec;
  m.affinity.assign(spec.user_categories, std::vector<double>(spec.item_categories));
  for (auto& row : m.affinity) {
    for (double& a : row) a = rng.uniform(-1.5, 1.5);
  }

  std::vector<std::vector<std::size_t>> user_noise(spec.users), item_noise(spec.items);
  for (std::size_t u = 0; u < spec.users; ++u) {
    m.user_category.push_back(rng.below(spec.user_categories));
    m.user_a.push_back(static_cast<int>(rng.below(2)));
    m.user_b.push_back(static_cast<int>(rng.below(2)));
    for (std::size_t k = 0; k < spec.user_noise_attributes; ++k) user_noise[u].push_back(rng.below(spec.noise_cardinality));
  }
  for (std::size_t i = 0; i < spec.items; ++i) {
    m.item_category.push_back(rng.below(spec.item_categories));
    m.item_polarity.push_back(static_cast<int>(rng.below(2)));
    for (std::size_t k = 0; k < spec.item_noise_attributes; ++k) item_noise[i].push_back(rng.below(spec.noise_cardinality));
  }

  Vocabulary& vocab = out.dataset.vocab;
  auto user_chars = [&](std::size_t u) {
    std::vector<AttributeValuePair> chars;
    chars.push_back({vocab.intern(Side::kUser, fmt::format("user_{}", u))});
    chars.push_back({vocab.intern(Side::kUser, fmt::format("uc_{}", m.user_category[u]))});
    chars.push_back({vocab.intern(Side::kUser, fmt::format("ux0_{}", m.user_a[u]))});
    chars.push_back({vocab.intern(Side::kUser, fmt::format("ux1_{}", m.user_b[u]))});
    for (std::size_t k = 0; k < user_noise[u].size(); ++k) {
      chars.push_back({vocab.intern(Side::kUser, fmt::format("un{}_{}", k, user_noise[u][k]))});
    }
    return chars;
  };
  auto item_chars = [&](std::size_t i) {
    std::vector<AttributeValuePair> chars;
    chars.push_back({vocab.intern(Side::kItem, fmt::format("item_{}", i))});
    chars.push_back({vocab.intern(Side::kItem, fmt::format("ic_{}", m.item_category[i]))});
    chars.push_back({vocab.intern(Side::kItem, fmt::format("ip_{}", m.item_polarity[i]))});
    for (std::size_t k = 0; k < item_noise[i].size(); ++k) {
      chars.push_back({vocab.intern(Side::kItem, fmt::format("in{}_{}", k, item_noise[i][k]))});
    }
    return chars;
  };

  std::vector<std::size_t> pool(spec.items);
  for (std::size_t u = 0; u < spec.users; ++u) {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    const auto user = user_chars(u);
    for (std::size_t k = 0; k < spec.samples_per_user; ++k) {
      std::swap(pool[k], pool[k + rng.below(spec.items - k)]);
      const std::size_t i = pool[k];
      const double score = m.clean_score(u, i);
      double label = score > 0.0 ? 1.0 : 0.0;
      if (rng.bernoulli(spec.noise)) label = rng.bernoulli(0.5) ? 1.0 : 0.0;
      out.dataset.samples.push_back({user, item_chars(i), label});
      out.user_index.push_back(u);
      out.item_index.push_back(i);
      out.clean_scores.push_back(score);
    }
  }
  return out;
}

}  // namespace gmcf
