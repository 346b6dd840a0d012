#pragma once

// Data model shared by every module: attributes, attribute-value pairs,
// samples, the attribute vocabulary and the embedding table.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gmcf/autodiff.hpp"

namespace gmcf {

enum class Side : std::uint8_t { kUser = 0, kItem = 1 };

const char* side_name(Side side) noexcept;

// Index into the global attribute universe. The side is fixed per id.
struct AttributeId {
  std::uint32_t id = 0;
  Side side = Side::kUser;

  friend bool operator==(const AttributeId&, const AttributeId&) = default;
  friend auto operator<=>(const AttributeId&, const AttributeId&) = default;
};

// One (att, val) observation. Categorical presence is val = 1.
struct AttributeValuePair {
  AttributeId att;
  double val = 1.0;

  friend bool operator==(const AttributeValuePair&, const AttributeValuePair&) = default;
};

// A user characteristic, an item characteristic and an implicit-feedback
// label. By convention the first attribute on each side identifies the user
// (resp. item).
struct DataSample {
  std::vector<AttributeValuePair> user;
  std::vector<AttributeValuePair> item;
  double label = 0.0;

  AttributeId user_key() const { return user.front().att; }
  AttributeId item_key() const { return item.front().att; }

  friend bool operator==(const DataSample&, const DataSample&) = default;
};

// Throws ContractError when a side is empty, a pair sits on the wrong side,
// an id repeats within a side, a value is non-finite or the label is not 0/1.
void validate_sample(const DataSample& sample);

// Attribute names per side, with ids assigned in first-appearance order. The
// same name on the user and item side yields two distinct ids.
class Vocabulary {
 public:
  AttributeId intern(Side side, std::string_view name);
  std::optional<AttributeId> find(Side side, std::string_view name) const;

  const std::string& name(AttributeId att) const;
  Side side(std::uint32_t id) const { return sides_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }
  std::vector<AttributeId> universe() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.names_ == b.names_ && a.sides_ == b.sides_;
  }

 private:
  static std::string key(Side side, std::string_view name);

  std::vector<std::string> names_;
  std::vector<Side> sides_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct Dataset {
  Vocabulary vocab;
  std::vector<DataSample> samples;
};

// One trainable vector per attribute, indexed by AttributeId::id. Every
// sample that mentions an attribute resolves to the same vector.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  // Number of id slots (ids need not be dense; missing slots are absent).
  std::size_t slots() const noexcept { return vectors_.size(); }
  std::size_t size() const noexcept;

  bool contains(AttributeId att) const noexcept;
  const Parameter& at(AttributeId att) const;
  Parameter& at(AttributeId att);
  void set(AttributeId att, std::vector<double> values);

  // Present vectors in id order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.dim_ == b.dim_ && a.present_ == b.present_ && a.vectors_ == b.vectors_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<Parameter> vectors_;
  std::vector<bool> present_;
};

// Draws each vector independently from U[-1/sqrt(dim), +1/sqrt(dim)] in
// universe order. Same seed, same table.
EmbeddingTable init_embeddings(std::span<const AttributeId> universe, std::size_t dim, std::uint64_t seed);

// u = val * v_att
std::vector<double> node_representation(const AttributeValuePair& pair, const EmbeddingTable& table);

}  // namespace gmcf
