#include "gmcf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "gmcf/errors.hpp"
#include "gmcf/variant_config.hpp"

namespace gmcf {

namespace {

constexpr std::string_view kMagic = "GMCFCKP1";
constexpr std::string_view kMagicFamily = "GMCFCKP";

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void uint(T v) {
    for (std::size_t k = 0; k < sizeof(T); ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { out_.append(s); }
  void str(std::string_view s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::string& buffer() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename T>
  T uint(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) {
      v |= static_cast<T>(static_cast<unsigned char>(in_[pos_ + k])) << (8 * k);
    }
    pos_ += sizeof(T);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }
  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string_view str(const char* what) { return bytes(uint<std::uint32_t>(what), what); }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw CorruptCheckpointError(fmt::format("checkpoint truncated while reading {} ({} bytes needed, {} left)",
                                               what, n, remaining()));
    }
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

struct ArrayCounts {
  std::uint32_t mlp = 0;
  std::uint32_t gru = 0;
};

ArrayCounts count_arrays(const ModelParams& params) {
  ArrayCounts c;
  for (const auto* m : {&params.mlp, &params.cross_mlp, &params.fuse_mlp}) {
    if (*m) c.mlp += static_cast<std::uint32_t>(2 * (*m)->layers().size());
  }
  if (params.gru) c.gru = 12;
  return c;
}

}  // namespace

std::string encode_checkpoint(const ModelParams& params, const Vocabulary& vocab) {
  const auto registry = params.registry();
  if (params.embeddings.size() != vocab.size() || params.embeddings.slots() != vocab.size()) {
    throw CheckpointError(fmt::format("embedding table holds {} vectors but the vocabulary has {} attributes",
                                      params.embeddings.size(), vocab.size()));
  }
  std::uint64_t scalars = 0;
  for (const Parameter* p : registry) scalars += p->size();
  const ArrayCounts counts = count_arrays(params);

  Writer w;
  w.bytes(kMagic);
  w.uint<std::uint64_t>(params.shape.dim);
  w.uint<std::uint64_t>(vocab.size());
  w.str(to_string(params.variant));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(params.shape.mlp_depth));
  w.uint<std::uint32_t>(counts.mlp);
  w.uint<std::uint32_t>(counts.gru);
  w.uint<std::uint64_t>(scalars);
  for (const AttributeId& att : vocab.universe()) {
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(att.side));
    w.str(vocab.name(att));
  }
  for (const Parameter* p : registry) {
    for (double v : p->values()) w.f64(v);
  }
  const std::uint64_t hash = fnv1a(w.buffer());
  w.uint<std::uint64_t>(hash);
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    if (bytes.size() >= kMagic.size() && bytes.substr(0, kMagicFamily.size()) == kMagicFamily) {
      throw UnsupportedVersionError(
          fmt::format("unsupported checkpoint version '{}' (this build reads version 1)", bytes[kMagicFamily.size()]));
    }
    if (bytes.size() < kMagic.size() && kMagic.substr(0, bytes.size()) == bytes && !bytes.empty()) {
      throw CorruptCheckpointError("checkpoint truncated inside the magic number");
    }
    throw UnsupportedFormatError("not a checkpoint file (bad magic number)");
  }

  Reader r(bytes);
  r.bytes(kMagic.size(), "magic");
  const auto dim = r.uint<std::uint64_t>("dimension");
  const auto universe_size = r.uint<std::uint64_t>("universe size");
  const std::string variant_text(r.str("variant"));
  const auto depth = r.uint<std::uint32_t>("mlp depth");
  const auto mlp_arrays = r.uint<std::uint32_t>("MLP array count");
  const auto gru_arrays = r.uint<std::uint32_t>("GRU array count");
  const auto scalars = r.uint<std::uint64_t>("parameter count");

  if (dim == 0 || dim > (1u << 20)) throw CorruptCheckpointError(fmt::format("implausible dimension {}", dim));
  if (universe_size > bytes.size()) {
    throw CorruptCheckpointError(fmt::format("universe size {} exceeds the file size", universe_size));
  }

  Checkpoint out;
  for (std::uint64_t id = 0; id < universe_size; ++id) {
    const auto side = r.uint<std::uint8_t>("attribute side");
    if (side > 1) throw CorruptCheckpointError(fmt::format("attribute {} has invalid side {}", id, side));
    const std::string_view name = r.str("attribute name");
    const AttributeId att = out.vocab.intern(static_cast<Side>(side), name);
    if (att.id != id) throw CorruptCheckpointError(fmt::format("duplicate attribute name '{}'", name));
  }

  VariantConfig variant;
  try {
    variant = parse_variant(variant_text);
  } catch (const ConfigError& e) {
    throw CorruptCheckpointError(fmt::format("bad variant '{}': {}", variant_text, e.what()));
  }
  const auto universe = out.vocab.universe();
  try {
    out.params = ModelParams::create(universe, ModelShape{dim, depth}, variant, 0);
  } catch (const ConfigError& e) {
    throw CorruptCheckpointError(fmt::format("inconsistent header: {}", e.what()));
  }

  const ArrayCounts expected = count_arrays(out.params);
  if (expected.mlp != mlp_arrays || expected.gru != gru_arrays) {
    throw CorruptCheckpointError(fmt::format("header lists {} MLP and {} GRU arrays, the variant needs {} and {}",
                                             mlp_arrays, gru_arrays, expected.mlp, expected.gru));
  }
  auto registry = out.params.registry();
  std::uint64_t expected_scalars = 0;
  for (const Parameter* p : registry) expected_scalars += p->size();
  if (expected_scalars != scalars) {
    throw CorruptCheckpointError(
        fmt::format("header lists {} parameters, the shape needs {}", scalars, expected_scalars));
  }
  if (r.remaining() != scalars * 8 + 8) {
    throw CorruptCheckpointError(fmt::format("payload size mismatch: {} bytes left, expected {}", r.remaining(),
                                             scalars * 8 + 8));
  }
  for (Parameter* p : registry) {
    for (double& v : p->values()) v = r.f64("parameters");
  }
  const std::size_t body = r.position();
  const auto stored = r.uint<std::uint64_t>("checksum");
  if (stored != fnv1a(bytes.substr(0, body))) throw CorruptCheckpointError("checkpoint checksum mismatch");
  return out;
}

void save_checkpoint(const ModelParams& params, const Vocabulary& vocab, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(params, vocab);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace gmcf
