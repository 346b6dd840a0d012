#pragma once

#include <string>
#include <string_view>

namespace gmcf {

enum class InnerKind { kMlp, kBi };
enum class CrossKind { kBi, kMlpShared, kMlpSeparate, kNone };
// kLinear is u + s/2; it only makes sense over the union graph, where it
// yields the factorization-machine reduction.
enum class FuseKind { kGru, kSum, kMlp, kLinear };
// kSplit: separate user/item graphs joined by node matching and a dot-product
// match. kUnion: every pair in the union node set is treated as a cross
// interaction and the match is sum(v_user) + sum(v_item).
enum class GraphMode { kSplit, kUnion };

struct VariantConfig {
  InnerKind inner = InnerKind::kMlp;
  CrossKind cross = CrossKind::kBi;
  FuseKind fuse = FuseKind::kGru;
  GraphMode graph = GraphMode::kSplit;

  friend bool operator==(const VariantConfig&, const VariantConfig&) = default;

  // <MLP, Bi, GRU>
  static VariantConfig canonical() { return {}; }
  // Element-wise products everywhere, linear fuse and linear match.
  static VariantConfig fm_reduction() {
    return {InnerKind::kBi, CrossKind::kBi, FuseKind::kLinear, GraphMode::kUnion};
  }

  bool uses_mlp() const { return (graph == GraphMode::kSplit && inner == InnerKind::kMlp) || cross == CrossKind::kMlpShared; }
  bool uses_cross_mlp() const { return cross == CrossKind::kMlpSeparate; }
  bool uses_fuse_mlp() const { return fuse == FuseKind::kMlp; }
  bool uses_gru() const { return fuse == FuseKind::kGru; }
};

// Throws ConfigError on inconsistent combinations.
void validate_variant(const VariantConfig& config);

// Accepts "inner=mlp,cross=bi,fuse=gru[,graph=union]" (any key order, missing
// keys take canonical values) and the presets "gmcf" and "fm".
VariantConfig parse_variant(std::string_view text);
std::string to_string(const VariantConfig& config);
// Short label such as "<MLP, Bi, GRU>".
std::string display_name(const VariantConfig& config);

}  // namespace gmcf
