#include "gmcf/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gmcf/errors.hpp"

namespace gmcf {

namespace {

Parameter uniform_parameter(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Parameter(rows, cols, std::move(v));
}

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

void require_length(std::span<const double> v, std::size_t d, const char* what) {
  if (v.size() != d) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(d) + ", got " +
                     std::to_string(v.size()));
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double ForwardResult::probability() const { return sigmoid(score); }

// ---- Mlp ------------------------------------------------------------------

Mlp Mlp::create(std::size_t in, std::size_t hidden, std::size_t out, std::size_t hidden_layers, Rng& rng) {
  Mlp m;
  std::size_t fan_in = in;
  for (std::size_t l = 0; l <= hidden_layers; ++l) {
    const std::size_t fan_out = l == hidden_layers ? out : hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer;
    layer.weight = uniform_parameter(fan_out, fan_in, bound, rng);
    layer.bias = uniform_parameter(fan_out, 1, bound, rng);
    m.layers_.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return m;
}

Var Mlp::apply(Tape& tape, Var x) const {
  Var h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = tape.add(tape.matvec(tape.param(layers_[l].weight), h), tape.param(layers_[l].bias));
    if (l + 1 < layers_.size()) h = tape.relu(h);
  }
  return h;
}

Var Mlp::first_left(Tape& tape, Var a) const {
  const DenseLayer& first = layers_.front();
  return tape.add(tape.matvec(tape.param(first.weight), a, 0), tape.param(first.bias));
}

Var Mlp::first_right(Tape& tape, Var b, std::size_t left_size) const {
  return tape.matvec(tape.param(layers_.front().weight), b, left_size);
}

Var Mlp::sum_over_pairs(Tape& tape, Var left, std::span<const Var> rights) const {
  if (rights.empty()) throw ContractError("sum_over_pairs: no pairs");
  if (layers_.size() == 1) {
    Var acc = tape.add(left, rights[0]);
    for (std::size_t j = 1; j < rights.size(); ++j) acc = tape.add(acc, tape.add(left, rights[j]));
    return acc;
  }
  Var hidden_sum;
  for (std::size_t j = 0; j < rights.size(); ++j) {
    Var h = tape.relu(tape.add(left, rights[j]));
    for (std::size_t l = 1; l + 1 < layers_.size(); ++l) {
      h = tape.relu(tape.add(tape.matvec(tape.param(layers_[l].weight), h), tape.param(layers_[l].bias)));
    }
    hidden_sum = j == 0 ? h : tape.add(hidden_sum, h);
  }
  const DenseLayer& last = layers_.back();
  Var bias = tape.param(last.bias);
  if (rights.size() > 1) bias = tape.scale(bias, static_cast<double>(rights.size()));
  return tape.add(tape.matvec(tape.param(last.weight), hidden_sum), bias);
}

void Mlp::collect(std::vector<Parameter*>& out) {
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
}

void Mlp::collect(std::vector<const Parameter*>& out) const {
  for (const auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
}

// ---- Gru ------------------------------------------------------------------

Gru Gru::create(std::size_t dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  Gru g;
  for (Parameter* w : {&g.w_ir, &g.w_iz, &g.w_in, &g.w_hr, &g.w_hz, &g.w_hn}) {
    *w = uniform_parameter(dim, dim, bound, rng);
  }
  for (Parameter* b : {&g.b_ir, &g.b_iz, &g.b_in, &g.b_hr, &g.b_hz, &g.b_hn}) {
    *b = uniform_parameter(dim, 1, bound, rng);
  }
  return g;
}

Var Gru::step(Tape& tape, Var x, std::optional<Var> h) const {
  auto input_part = [&](const Parameter& w, const Parameter& b) {
    return tape.add(tape.matvec(tape.param(w), x), tape.param(b));
  };
  auto hidden_part = [&](const Parameter& w, const Parameter& b) {
    if (!h) return tape.param(b);
    return tape.add(tape.matvec(tape.param(w), *h), tape.param(b));
  };
  Var r = tape.sigmoid(tape.add(input_part(w_ir, b_ir), hidden_part(w_hr, b_hr)));
  Var z = tape.sigmoid(tape.add(input_part(w_iz, b_iz), hidden_part(w_hz, b_hz)));
  Var n = tape.tanh(tape.add(input_part(w_in, b_in), tape.mul(r, hidden_part(w_hn, b_hn))));
  // (1 - z) n + z h  ==  n + z (h - n)
  if (!h) return tape.sub(n, tape.mul(z, n));
  return tape.add(n, tape.mul(z, tape.sub(*h, n)));
}

Var Gru::run(Tape& tape, std::span<const Var> sequence) const {
  if (sequence.empty()) throw ContractError("gru: empty input sequence");
  std::optional<Var> h;
  for (const Var& x : sequence) h = step(tape, x, h);
  return *h;
}

void Gru::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&w_ir, &w_iz, &w_in, &w_hr, &w_hz, &w_hn, &b_ir, &b_iz, &b_in, &b_hr, &b_hz, &b_hn}) {
    out.push_back(p);
  }
}

void Gru::collect(std::vector<const Parameter*>& out) const {
  for (const Parameter* p : {&w_ir, &w_iz, &w_in, &w_hr, &w_hz, &w_hn, &b_ir, &b_iz, &b_in, &b_hr, &b_hz, &b_hn}) {
    out.push_back(p);
  }
}

// ---- ModelParams ------------------------------------------------------------

ModelParams ModelParams::create(std::span<const AttributeId> universe, const ModelShape& shape,
                                const VariantConfig& variant, std::uint64_t seed) {
  validate_variant(variant);
  if (shape.mlp_depth > 4) throw ConfigError("mlp depth must be between 0 and 4");
  ModelParams p;
  p.variant = variant;
  p.shape = shape;
  p.embeddings = init_embeddings(universe, shape.dim, seed);
  const std::size_t d = shape.dim;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  if (variant.uses_mlp()) p.mlp = Mlp::create(2 * d, 4 * d, d, shape.mlp_depth, rng);
  if (variant.uses_cross_mlp()) p.cross_mlp = Mlp::create(2 * d, 4 * d, d, shape.mlp_depth, rng);
  if (variant.uses_fuse_mlp()) p.fuse_mlp = Mlp::create(3 * d, 4 * d, d, 1, rng);
  if (variant.uses_gru()) p.gru = Gru::create(d, rng);
  return p;
}

std::vector<Parameter*> ModelParams::network_parameters() {
  std::vector<Parameter*> out;
  if (mlp) mlp->collect(out);
  if (cross_mlp) cross_mlp->collect(out);
  if (fuse_mlp) fuse_mlp->collect(out);
  if (gru) gru->collect(out);
  return out;
}

std::vector<const Parameter*> ModelParams::network_parameters() const {
  std::vector<const Parameter*> out;
  if (mlp) mlp->collect(out);
  if (cross_mlp) cross_mlp->collect(out);
  if (fuse_mlp) fuse_mlp->collect(out);
  if (gru) gru->collect(out);
  return out;
}

std::vector<Parameter*> ModelParams::registry() {
  auto out = embeddings.parameters();
  auto net = network_parameters();
  out.insert(out.end(), net.begin(), net.end());
  return out;
}

std::vector<const Parameter*> ModelParams::registry() const {
  auto out = embeddings.parameters();
  auto net = network_parameters();
  out.insert(out.end(), net.begin(), net.end());
  return out;
}

void ModelParams::zero_grad() const {
  for (const Parameter* p : registry()) p->zero_grad();
}

void ModelParams::require(const VariantConfig& config) const {
  validate_variant(config);
  if (config.uses_mlp() && !mlp) throw ConfigError("variant " + to_string(config) + " needs the interaction MLP");
  if (config.uses_cross_mlp() && !cross_mlp) {
    throw ConfigError("variant " + to_string(config) + " needs a separate cross-interaction MLP");
  }
  if (config.uses_fuse_mlp() && !fuse_mlp) throw ConfigError("variant " + to_string(config) + " needs the fusing MLP");
  if (config.uses_gru() && !gru) throw ConfigError("variant " + to_string(config) + " needs the GRU");
}

// ---- tracked building blocks ---------------------------------------------

std::vector<Var> track_nodes(Tape& tape, const EmbeddingTable& table, std::span<const AttributeValuePair> chars) {
  std::vector<Var> out;
  out.reserve(chars.size());
  for (const auto& pair : chars) {
    Var v = tape.param(table.at(pair.att));
    out.push_back(pair.val == 1.0 ? v : tape.scale(v, pair.val));
  }
  return out;
}

namespace {

// sum_{j != i} MLP(concat(u_i, u_j)) or sum_j MLP(concat(u_i, o_j)).
std::vector<Var> mlp_pair_sums(Tape& tape, const Mlp& mlp, std::span<const Var> nodes,
                               std::span<const Var> others, bool exclude_self) {
  const std::size_t d = nodes.front().size();
  std::vector<Var> rights;
  rights.reserve(others.size());
  for (const Var& o : others) rights.push_back(mlp.first_right(tape, o, d));
  std::vector<Var> out;
  out.reserve(nodes.size());
  std::vector<Var> selected;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    selected.clear();
    for (std::size_t j = 0; j < rights.size(); ++j) {
      if (!exclude_self || j != i) selected.push_back(rights[j]);
    }
    out.push_back(mlp.sum_over_pairs(tape, mlp.first_left(tape, nodes[i]), selected));
  }
  return out;
}

std::vector<Var> bi_pair_sums(Tape& tape, std::span<const Var> nodes) {
  std::vector<Var> out;
  out.reserve(nodes.size());
  std::vector<Var> terms;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    terms.clear();
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (j != i) terms.push_back(tape.mul(nodes[i], nodes[j]));
    }
    out.push_back(tape.add_all(terms));
  }
  return out;
}

const Mlp& cross_network(const ModelParams& params, const VariantConfig& config) {
  return config.cross == CrossKind::kMlpSeparate ? *params.cross_mlp : *params.mlp;
}

}  // namespace

std::vector<Var> track_message_pass(Tape& tape, const ModelParams& params, const VariantConfig& config,
                                    std::span<const Var> nodes) {
  if (nodes.empty()) throw ContractError("message_pass: graph has no nodes");
  if (nodes.size() == 1) return {tape.zeros(nodes.front().size())};
  if (config.inner == InnerKind::kBi) return bi_pair_sums(tape, nodes);
  if (!params.mlp) throw ConfigError("message_pass: inner=mlp needs the interaction MLP");
  return mlp_pair_sums(tape, *params.mlp, nodes, nodes, true);
}

std::vector<Var> track_node_match(Tape& tape, const ModelParams& params, const VariantConfig& config,
                                  std::span<const Var> nodes, std::span<const Var> opposite) {
  if (opposite.empty()) throw ContractError("node_match: opposite graph has no nodes");
  std::vector<Var> out;
  out.reserve(nodes.size());
  switch (config.cross) {
    case CrossKind::kNone:
      for (const Var& u : nodes) out.push_back(tape.zeros(u.size()));
      break;
    case CrossKind::kBi: {
      // u_i (.) sum_j u^_j, the opposite sum shared by every node.
      Var total = tape.add_all(opposite);
      for (const Var& u : nodes) out.push_back(tape.mul(u, total));
      break;
    }
    case CrossKind::kMlpShared:
    case CrossKind::kMlpSeparate:
      params.require(config);
      return mlp_pair_sums(tape, cross_network(params, config), nodes, opposite, false);
  }
  return out;
}

Var track_fuse(Tape& tape, const ModelParams& params, const VariantConfig& config, Var u, Var z, Var s) {
  if (u.size() != z.size() || u.size() != s.size()) {
    throw ShapeError("fuse: inputs of lengths " + std::to_string(u.size()) + ", " + std::to_string(z.size()) +
                     ", " + std::to_string(s.size()));
  }
  switch (config.fuse) {
    case FuseKind::kGru: {
      if (!params.gru) throw ConfigError("fuse=gru needs the GRU");
      const Var seq[] = {u, z, s};
      return params.gru->run(tape, seq);
    }
    case FuseKind::kSum:
      return tape.add(tape.add(u, z), s);
    case FuseKind::kMlp:
      if (!params.fuse_mlp) throw ConfigError("fuse=mlp needs the fusing MLP");
      return params.fuse_mlp->apply(tape, tape.concat({u, z, s}));
    case FuseKind::kLinear:
      return tape.add(u, tape.scale(s, 0.5));
  }
  throw ConfigError("unknown fuse kind");
}

namespace {

Var fuse_all(Tape& tape, const ModelParams& params, const VariantConfig& config, std::vector<TrackedNode>& nodes) {
  std::vector<Var> fused;
  fused.reserve(nodes.size());
  for (auto& n : nodes) {
    n.fused = track_fuse(tape, params, config, n.u, n.z, n.s);
    fused.push_back(n.fused);
  }
  return tape.add_all(fused);
}

std::vector<TrackedNode> make_nodes(std::span<const AttributeValuePair> chars, std::span<const Var> u,
                                    std::span<const Var> z, std::span<const Var> s) {
  std::vector<TrackedNode> out(chars.size());
  for (std::size_t i = 0; i < chars.size(); ++i) out[i] = {chars[i].att, u[i], z[i], s[i], {}};
  return out;
}

std::vector<std::size_t> id_order(std::span<const AttributeValuePair> chars) {
  std::vector<std::size_t> order(chars.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return chars[a].att.id < chars[b].att.id; });
  return order;
}

std::vector<AttributeValuePair> permuted(std::span<const AttributeValuePair> chars, std::span<const std::size_t> order) {
  std::vector<AttributeValuePair> out;
  out.reserve(chars.size());
  for (std::size_t i : order) out.push_back(chars[i]);
  return out;
}

// nodes[k] belongs at input position order[k].
void restore_order(std::vector<TrackedNode>& nodes, std::span<const std::size_t> order) {
  std::vector<TrackedNode> out(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) out[order[k]] = nodes[k];
  nodes = std::move(out);
}

}  // namespace

TrackedForward forward(Tape& tape, const ModelParams& params, const DataSample& sample, const VariantConfig& config) {
  validate_sample(sample);
  params.require(config);
  // Nodes are processed in attribute-id order so that every sum is formed in
  // the same order regardless of how the sample lists its attributes; the
  // diagnostics are reported back in input order.
  const auto user_order = id_order(sample.user);
  const auto item_order = id_order(sample.item);
  const auto user_chars = permuted(sample.user, user_order);
  const auto item_chars = permuted(sample.item, item_order);
  const std::vector<Var> user = track_nodes(tape, params.embeddings, user_chars);
  const std::vector<Var> item = track_nodes(tape, params.embeddings, item_chars);

  TrackedForward out;
  if (config.graph == GraphMode::kSplit) {
    const auto user_z = track_message_pass(tape, params, config, user);
    const auto item_z = track_message_pass(tape, params, config, item);
    const auto user_s = track_node_match(tape, params, config, user, item);
    const auto item_s = track_node_match(tape, params, config, item, user);
    out.user_nodes = make_nodes(user_chars, user, user_z, user_s);
    out.item_nodes = make_nodes(item_chars, item, item_z, item_s);
    out.user_repr = fuse_all(tape, params, config, out.user_nodes);
    out.item_repr = fuse_all(tape, params, config, out.item_nodes);
    out.score = tape.dot(out.user_repr, out.item_repr);
    restore_order(out.user_nodes, user_order);
    restore_order(out.item_nodes, item_order);
    return out;
  }

  // Union graph: every pair of distinct nodes is a cross interaction.
  std::vector<Var> all(user);
  all.insert(all.end(), item.begin(), item.end());
  std::vector<Var> s;
  if (all.size() == 1) {
    s.push_back(tape.zeros(all.front().size()));
  } else if (config.cross == CrossKind::kBi) {
    s = bi_pair_sums(tape, all);
  } else {
    s = mlp_pair_sums(tape, cross_network(params, config), all, all, true);
  }
  std::vector<Var> z;
  z.reserve(all.size());
  for (const Var& u : all) z.push_back(tape.zeros(u.size()));
  const std::size_t p = user.size();
  out.user_nodes = make_nodes(user_chars, std::span(all).first(p), std::span(z).first(p), std::span(s).first(p));
  out.item_nodes = make_nodes(item_chars, std::span(all).subspan(p), std::span(z).subspan(p), std::span(s).subspan(p));
  out.user_repr = fuse_all(tape, params, config, out.user_nodes);
  out.item_repr = fuse_all(tape, params, config, out.item_nodes);
  out.score = tape.add(tape.sum(out.user_repr), tape.sum(out.item_repr));
  restore_order(out.user_nodes, user_order);
  restore_order(out.item_nodes, item_order);
  return out;
}

// ---- value-level operations ---------------------------------------------

namespace {

std::vector<NodeDiagnostics> diagnostics(const std::vector<TrackedNode>& nodes) {
  std::vector<NodeDiagnostics> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) {
    out.push_back({n.att, to_vector(n.u.value()), to_vector(n.z.value()), to_vector(n.s.value()),
                   to_vector(n.fused.value())});
  }
  return out;
}

std::vector<Var> graph_constants(Tape& tape, const AttributeGraph& graph, std::size_t d) {
  std::vector<Var> out;
  for (const auto& n : graph.nodes) {
    require_length(n.repr, d, "graph node");
    out.push_back(tape.constant(n.repr));
  }
  return out;
}

}  // namespace

ForwardResult to_result(const TrackedForward& t) {
  ForwardResult r;
  r.user_repr = to_vector(t.user_repr.value());
  r.item_repr = to_vector(t.item_repr.value());
  r.score = t.score.scalar();
  r.user_nodes = diagnostics(t.user_nodes);
  r.item_nodes = diagnostics(t.item_nodes);
  return r;
}

std::vector<double> inner_message(std::span<const double> u_i, std::span<const double> u_j, const ModelParams& params) {
  if (!params.mlp) throw ConfigError("inner_message: parameters have no interaction MLP");
  const std::size_t d = params.shape.dim;
  require_length(u_i, d, "inner_message u_i");
  require_length(u_j, d, "inner_message u_j");
  Tape tape;
  Var x = tape.concat({tape.constant(u_i), tape.constant(u_j)});
  return to_vector(params.mlp->apply(tape, x).value());
}

std::vector<std::vector<double>> message_pass(const AttributeGraph& graph, const ModelParams& params) {
  Tape tape;
  const auto nodes = graph_constants(tape, graph, params.shape.dim);
  std::vector<std::vector<double>> out;
  for (const Var& z : track_message_pass(tape, params, params.variant, nodes)) out.push_back(to_vector(z.value()));
  return out;
}

std::vector<double> node_match(std::span<const double> u_i, std::span<const GraphNode> opposite) {
  if (opposite.empty()) throw ContractError("node_match: opposite graph has no nodes");
  std::vector<double> s(u_i.size(), 0.0);
  for (const auto& o : opposite) {
    require_length(o.repr, u_i.size(), "node_match");
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += u_i[k] * o.repr[k];
  }
  return s;
}

std::vector<double> fuse(std::span<const double> u, std::span<const double> z, std::span<const double> s,
                         const ModelParams& params) {
  const std::size_t d = params.shape.dim;
  require_length(u, d, "fuse u");
  require_length(z, d, "fuse z");
  require_length(s, d, "fuse s");
  Tape tape;
  return to_vector(
      track_fuse(tape, params, params.variant, tape.constant(u), tape.constant(z), tape.constant(s)).value());
}

std::vector<double> graph_representation(const AttributeGraph& graph, std::span<const GraphNode> opposite,
                                         const ModelParams& params) {
  if (params.variant.graph != GraphMode::kSplit) {
    throw ConfigError("graph_representation: union-graph variants have no per-graph representation");
  }
  Tape tape;
  const std::size_t d = params.shape.dim;
  const auto nodes = graph_constants(tape, graph, d);
  AttributeGraph other;
  other.nodes.assign(opposite.begin(), opposite.end());
  const auto opp = graph_constants(tape, other, d);
  const auto z = track_message_pass(tape, params, params.variant, nodes);
  const auto s = track_node_match(tape, params, params.variant, nodes, opp);
  std::vector<Var> fused;
  for (std::size_t i = 0; i < nodes.size(); ++i) fused.push_back(track_fuse(tape, params, params.variant, nodes[i], z[i], s[i]));
  return to_vector(tape.add_all(fused).value());
}

ForwardResult predict(const DataSample& sample, const ModelParams& params) {
  Tape tape;
  return to_result(forward(tape, params, sample, params.variant));
}

}  // namespace gmcf
