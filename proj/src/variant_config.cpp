#include "gmcf/variant_config.hpp"

#include <string>

#include "gmcf/errors.hpp"

namespace gmcf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

const char* inner_name(InnerKind k) { return k == InnerKind::kMlp ? "mlp" : "bi"; }

const char* cross_name(CrossKind k) {
  switch (k) {
    case CrossKind::kBi: return "bi";
    case CrossKind::kMlpShared: return "mlp";
    case CrossKind::kMlpSeparate: return "mlp-separate";
    case CrossKind::kNone: return "none";
  }
  return "?";
}

const char* fuse_name(FuseKind k) {
  switch (k) {
    case FuseKind::kGru: return "gru";
    case FuseKind::kSum: return "sum";
    case FuseKind::kMlp: return "mlp";
    case FuseKind::kLinear: return "linear";
  }
  return "?";
}

}  // namespace

void validate_variant(const VariantConfig& c) {
  if (c.fuse == FuseKind::kLinear && c.graph != GraphMode::kUnion) {
    throw ConfigError("fuse=linear requires graph=union");
  }
  if (c.graph == GraphMode::kUnion && c.cross == CrossKind::kNone) {
    throw ConfigError("graph=union models every interaction as a cross interaction; cross=none leaves nothing");
  }
}

VariantConfig parse_variant(std::string_view text) {
  text = trim(text);
  if (text == "gmcf" || text == "canonical") return VariantConfig::canonical();
  if (text == "fm") return VariantConfig::fm_reduction();

  VariantConfig c;
  while (!text.empty()) {
    const auto comma = text.find(',');
    std::string_view item = trim(text.substr(0, comma));
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ConfigError("variant item '" + std::string(item) + "' is not key=value");
    const std::string_view key = trim(item.substr(0, eq));
    const std::string_view value = trim(item.substr(eq + 1));
    if (key == "inner") {
      if (value == "mlp") c.inner = InnerKind::kMlp;
      else if (value == "bi") c.inner = InnerKind::kBi;
      else throw ConfigError("unknown inner kind '" + std::string(value) + "'");
    } else if (key == "cross") {
      if (value == "bi") c.cross = CrossKind::kBi;
      else if (value == "mlp" || value == "mlp-shared") c.cross = CrossKind::kMlpShared;
      else if (value == "mlp-separate" || value == "mlp2") c.cross = CrossKind::kMlpSeparate;
      else if (value == "none") c.cross = CrossKind::kNone;
      else throw ConfigError("unknown cross kind '" + std::string(value) + "'");
    } else if (key == "fuse") {
      if (value == "gru") c.fuse = FuseKind::kGru;
      else if (value == "sum") c.fuse = FuseKind::kSum;
      else if (value == "mlp") c.fuse = FuseKind::kMlp;
      else if (value == "linear") c.fuse = FuseKind::kLinear;
      else throw ConfigError("unknown fuse kind '" + std::string(value) + "'");
    } else if (key == "graph") {
      if (value == "split") c.graph = GraphMode::kSplit;
      else if (value == "union") c.graph = GraphMode::kUnion;
      else throw ConfigError("unknown graph mode '" + std::string(value) + "'");
    } else {
      throw ConfigError("unknown variant key '" + std::string(key) + "'");
    }
  }
  validate_variant(c);
  return c;
}

std::string to_string(const VariantConfig& c) {
  std::string s = std::string("inner=") + inner_name(c.inner) + ",cross=" + cross_name(c.cross) +
                  ",fuse=" + fuse_name(c.fuse);
  if (c.graph == GraphMode::kUnion) s += ",graph=union";
  return s;
}

std::string display_name(const VariantConfig& c) {
  if (c == VariantConfig::fm_reduction()) return "FM-reduction";
  std::string inner = c.inner == InnerKind::kMlp ? "MLP" : "Bi";
  std::string cross;
  switch (c.cross) {
    case CrossKind::kBi: cross = "Bi"; break;
    case CrossKind::kMlpShared: cross = "MLP"; break;
    case CrossKind::kMlpSeparate: cross = "MLP2"; inner = inner == "MLP" ? "MLP1" : inner; break;
    case CrossKind::kNone: cross = "None"; break;
  }
  std::string fuse;
  switch (c.fuse) {
    case FuseKind::kGru: fuse = "GRU"; break;
    case FuseKind::kSum: fuse = "SUM"; break;
    case FuseKind::kMlp: fuse = "MLP"; break;
    case FuseKind::kLinear: fuse = "Linear"; break;
  }
  std::string s = "<" + inner + ", " + cross + ", " + fuse + ">";
  if (c.graph == GraphMode::kUnion) s += " union";
  return s;
}

}  // namespace gmcf
