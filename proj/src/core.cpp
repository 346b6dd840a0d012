#include "gmcf/core.hpp"

#include <cmath>
#include <unordered_set>

#include "gmcf/errors.hpp"
#include "gmcf/random.hpp"

namespace gmcf {

const char* side_name(Side side) noexcept { return side == Side::kUser ? "user" : "item"; }

namespace {

void validate_side(std::span<const AttributeValuePair> pairs, Side side) {
  if (pairs.empty()) throw ContractError(std::string("sample has no ") + side_name(side) + " attributes");
  std::unordered_set<std::uint32_t> seen;
  for (const auto& p : pairs) {
    if (p.att.side != side) {
      throw ContractError("attribute " + std::to_string(p.att.id) + " is not a " + side_name(side) + " attribute");
    }
    if (!std::isfinite(p.val)) throw ContractError("attribute " + std::to_string(p.att.id) + " has non-finite value");
    if (!seen.insert(p.att.id).second) {
      throw ContractError("attribute " + std::to_string(p.att.id) + " repeats on the " + side_name(side) + " side");
    }
  }
}

}  // namespace

void validate_sample(const DataSample& sample) {
  validate_side(sample.user, Side::kUser);
  validate_side(sample.item, Side::kItem);
  if (sample.label != 0.0 && sample.label != 1.0) throw ContractError("label must be 0 or 1");
}

std::string Vocabulary::key(Side side, std::string_view name) {
  std::string k(1, side == Side::kUser ? 'U' : 'I');
  k.append(name);
  return k;
}

AttributeId Vocabulary::intern(Side side, std::string_view name) {
  auto [it, inserted] = index_.try_emplace(key(side, name), static_cast<std::uint32_t>(names_.size()));
  if (inserted) {
    names_.emplace_back(name);
    sides_.push_back(side);
  }
  return {it->second, side};
}

std::optional<AttributeId> Vocabulary::find(Side side, std::string_view name) const {
  auto it = index_.find(key(side, name));
  if (it == index_.end()) return std::nullopt;
  return AttributeId{it->second, side};
}

const std::string& Vocabulary::name(AttributeId att) const {
  if (att.id >= names_.size()) throw MissingEmbeddingError("unknown attribute id " + std::to_string(att.id));
  return names_[att.id];
}

std::vector<AttributeId> Vocabulary::universe() const {
  std::vector<AttributeId> out;
  out.reserve(names_.size());
  for (std::uint32_t i = 0; i < names_.size(); ++i) out.push_back({i, sides_[i]});
  return out;
}

std::size_t EmbeddingTable::size() const noexcept {
  std::size_t n = 0;
  for (bool p : present_) n += p ? 1 : 0;
  return n;
}

bool EmbeddingTable::contains(AttributeId att) const noexcept {
  return att.id < present_.size() && present_[att.id];
}

const Parameter& EmbeddingTable::at(AttributeId att) const {
  if (!contains(att)) throw MissingEmbeddingError("no embedding for attribute " + std::to_string(att.id));
  return vectors_[att.id];
}

Parameter& EmbeddingTable::at(AttributeId att) {
  if (!contains(att)) throw MissingEmbeddingError("no embedding for attribute " + std::to_string(att.id));
  return vectors_[att.id];
}

void EmbeddingTable::set(AttributeId att, std::vector<double> values) {
  if (values.size() != dim_) {
    throw ShapeError("embedding of length " + std::to_string(values.size()) + " in a table of dim " +
                     std::to_string(dim_));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("non-finite embedding entry for attribute " + std::to_string(att.id));
  }
  if (att.id >= vectors_.size()) {
    vectors_.resize(att.id + 1);
    present_.resize(att.id + 1, false);
  }
  vectors_[att.id] = Parameter(dim_, 1, std::move(values));
  present_[att.id] = true;
}

std::vector<Parameter*> EmbeddingTable::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (present_[i]) out.push_back(&vectors_[i]);
  }
  return out;
}

std::vector<const Parameter*> EmbeddingTable::parameters() const {
  std::vector<const Parameter*> out;
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (present_[i]) out.push_back(&vectors_[i]);
  }
  return out;
}

EmbeddingTable init_embeddings(std::span<const AttributeId> universe, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("embedding dimension must be at least 1");
  if (universe.empty()) throw ConfigError("attribute universe is empty");
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  EmbeddingTable table(dim);
  for (const AttributeId& att : universe) {
    if (table.contains(att)) throw ConfigError("attribute " + std::to_string(att.id) + " listed twice");
    std::vector<double> v(dim);
    for (double& x : v) x = rng.uniform(-bound, bound);
    table.set(att, std::move(v));
  }
  return table;
}

std::vector<double> node_representation(const AttributeValuePair& pair, const EmbeddingTable& table) {
  auto v = table.at(pair.att).values();
  std::vector<double> u(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) u[k] = pair.val * v[k];
  return u;
}

}  // namespace gmcf
