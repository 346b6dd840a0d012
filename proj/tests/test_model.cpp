#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "gmcf/errors.hpp"
#include "gmcf/graph.hpp"
#include "gmcf/model.hpp"
#include "gmcf/variants.hpp"

namespace gmcf {
namespace {

using Vec = std::vector<double>;

// ---- straight-line oracles --------------------------------------------------

Vec matvec(const Parameter& m, const Vec& x) {
  Vec y(m.rows(), 0.0);
  auto w = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) y[r] += w[r * m.cols() + c] * x[c];
  }
  return y;
}

Vec add(Vec a, const Vec& b) {
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  return a;
}

Vec add(Vec a, std::span<const double> b) {
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  return a;
}

Vec hadamard(const Vec& a, const Vec& b) {
  Vec c(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) c[k] = a[k] * b[k];
  return c;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec mlp_oracle(const Mlp& mlp, Vec x) {
  const auto layers = mlp.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = add(matvec(layers[l].weight, x), layers[l].bias.values());
    if (l + 1 < layers.size()) {
      for (double& v : x) v = std::max(0.0, v);
    }
  }
  return x;
}

Vec gru_oracle(const Gru& g, const std::vector<Vec>& seq) {
  const std::size_t d = seq.front().size();
  Vec h(d, 0.0);
  for (const Vec& x : seq) {
    const Vec ir = add(matvec(g.w_ir, x), g.b_ir.values()), hr = add(matvec(g.w_hr, h), g.b_hr.values());
    const Vec iz = add(matvec(g.w_iz, x), g.b_iz.values()), hz = add(matvec(g.w_hz, h), g.b_hz.values());
    const Vec in = add(matvec(g.w_in, x), g.b_in.values()), hn = add(matvec(g.w_hn, h), g.b_hn.values());
    Vec next(d);
    for (std::size_t k = 0; k < d; ++k) {
      const double r = sig(ir[k] + hr[k]);
      const double z = sig(iz[k] + hz[k]);
      const double n = std::tanh(in[k] + r * hn[k]);
      next[k] = (1 - z) * n + z * h[k];
    }
    h = next;
  }
  return h;
}

Vec concat(const Vec& a, const Vec& b) {
  Vec c(a);
  c.insert(c.end(), b.begin(), b.end());
  return c;
}

Vec rep(const AttributeValuePair& p, const EmbeddingTable& t) {
  Vec v(t.at(p.att).values().begin(), t.at(p.att).values().end());
  for (double& x : v) x *= p.val;
  return v;
}

// Full canonical forward written out node by node.
struct OracleForward {
  Vec user_repr, item_repr;
  double score = 0.0;
};

Vec side_oracle(const std::vector<AttributeValuePair>& own, const std::vector<AttributeValuePair>& other,
                const ModelParams& p) {
  const std::size_t d = p.shape.dim;
  Vec total(d, 0.0);
  for (std::size_t i = 0; i < own.size(); ++i) {
    const Vec ui = rep(own[i], p.embeddings);
    Vec z(d, 0.0);
    for (std::size_t j = 0; j < own.size(); ++j) {
      if (j != i) z = add(z, mlp_oracle(*p.mlp, concat(ui, rep(own[j], p.embeddings))));
    }
    Vec s(d, 0.0);
    for (const auto& o : other) s = add(s, hadamard(ui, rep(o, p.embeddings)));
    total = add(total, gru_oracle(*p.gru, {ui, z, s}));
  }
  return total;
}

OracleForward forward_oracle(const DataSample& s, const ModelParams& p) {
  OracleForward o;
  o.user_repr = side_oracle(s.user, s.item, p);
  o.item_repr = side_oracle(s.item, s.user, p);
  for (std::size_t k = 0; k < o.user_repr.size(); ++k) o.score += o.user_repr[k] * o.item_repr[k];
  return o;
}

void expect_near(std::span<const double> a, std::span<const double> b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], tol) << "entry " << k;
}

// ---- fixtures ---------------------------------------------------------------

struct World {
  std::vector<AttributeId> users, items, universe;

  World(std::size_t n_user, std::size_t n_item) {
    std::uint32_t id = 0;
    for (std::size_t k = 0; k < n_user; ++k) users.push_back({id++, Side::kUser});
    for (std::size_t k = 0; k < n_item; ++k) items.push_back({id++, Side::kItem});
    universe = users;
    universe.insert(universe.end(), items.begin(), items.end());
  }

  ModelParams params(std::size_t d, std::uint64_t seed, VariantConfig v = VariantConfig::canonical()) const {
    return ModelParams::create(universe, ModelShape{d, 1}, v, seed);
  }

  DataSample sample(std::vector<double> user_vals = {}, std::vector<double> item_vals = {}) const {
    DataSample s;
    for (std::size_t k = 0; k < users.size(); ++k) s.user.push_back({users[k], k < user_vals.size() ? user_vals[k] : 1.0});
    for (std::size_t k = 0; k < items.size(); ++k) s.item.push_back({items[k], k < item_vals.size() ? item_vals[k] : 1.0});
    s.label = 1.0;
    return s;
  }
};

void zero(Parameter& p) {
  for (double& x : p.values()) x = 0.0;
}

// ---- inner_message / message_pass ------------------------------------------

TEST(InnerMessage, ZeroWeightsGiveZero) {
  World w(2, 1);
  ModelParams p = w.params(4, 1);
  for (auto& l : p.mlp->layers()) {
    zero(l.weight);
    zero(l.bias);
  }
  const Vec z = inner_message(Vec{1, 2, 3, 4}, Vec{-1, 0.5, 2, 0}, p);
  EXPECT_EQ(z, Vec(4, 0.0));
}

TEST(InnerMessage, IdentityLikeWeights) {
  World w(2, 1);
  const std::size_t d = 2;
  ModelParams p = w.params(d, 1);
  auto layers = p.mlp->layers();
  zero(layers[0].weight);
  zero(layers[0].bias);
  zero(layers[1].weight);
  zero(layers[1].bias);
  // hidden = relu(concat(u_i, u_j)) padded with zeros; output = first d entries.
  for (std::size_t k = 0; k < 2 * d; ++k) layers[0].weight.values()[k * 2 * d + k] = 1.0;
  for (std::size_t k = 0; k < d; ++k) layers[1].weight.values()[k * 4 * d + k] = 1.0;
  EXPECT_EQ(inner_message(Vec{0.7, -0.3}, Vec{5, 5}, p), (Vec{0.7, 0.0}));
}

TEST(InnerMessage, MatchesStraightLineOracle) {
  World w(2, 1);
  const ModelParams p = w.params(2, 17);
  const Vec ui{1, 0}, uj{0, 1};
  expect_near(inner_message(ui, uj, p), mlp_oracle(*p.mlp, concat(ui, uj)), 1e-12);
}

TEST(InnerMessage, OrderMatters) {
  World w(2, 1);
  const ModelParams p = w.params(4, 3);
  const Vec a{0.1, 0.2, 0.3, 0.4}, b{-0.5, 0.1, 0.9, 0.0};
  EXPECT_NE(inner_message(a, b, p), inner_message(b, a, p));
}

TEST(InnerMessage, LengthMismatch) {
  World w(2, 1);
  const ModelParams p = w.params(4, 3);
  EXPECT_THROW(inner_message(Vec{1, 2}, Vec{1, 2, 3, 4}, p), ShapeError);
}

TEST(MessagePass, SingleNodeIsZero) {
  World w(1, 1);
  const ModelParams p = w.params(4, 2);
  const auto [g, h] = build_graphs(w.sample(), p.embeddings);
  EXPECT_EQ(message_pass(g, p), std::vector<Vec>{Vec(4, 0.0)});
}

TEST(MessagePass, TwoNodes) {
  World w(2, 1);
  const ModelParams p = w.params(4, 2);
  const auto [g, h] = build_graphs(w.sample({1.0, 0.5}), p.embeddings);
  const auto z = message_pass(g, p);
  expect_near(z[0], inner_message(g.nodes[0].repr, g.nodes[1].repr, p), 1e-12);
  expect_near(z[1], inner_message(g.nodes[1].repr, g.nodes[0].repr, p), 1e-12);
}

TEST(MessagePass, FactoredSumMatchesLiteralPairs) {
  for (std::size_t depth : {0u, 1u, 2u}) {
    World w(4, 1);
    const ModelParams p = ModelParams::create(w.universe, ModelShape{6, depth}, VariantConfig::canonical(), 8);
    const auto [g, h] = build_graphs(w.sample({1.0, 2.0, -0.5, 0.3}), p.embeddings);
    const auto z = message_pass(g, p);
    for (std::size_t i = 0; i < 4; ++i) {
      Vec literal(6, 0.0);
      for (std::size_t j = 0; j < 4; ++j) {
        if (j != i) literal = add(literal, inner_message(g.nodes[i].repr, g.nodes[j].repr, p));
      }
      expect_near(z[i], literal, 1e-12);
    }
  }
}

TEST(MessagePass, ZeroMlpThreeNodes) {
  World w(3, 1);
  ModelParams p = w.params(4, 2);
  for (auto& l : p.mlp->layers()) {
    zero(l.weight);
    zero(l.bias);
  }
  const auto [g, h] = build_graphs(w.sample(), p.embeddings);
  for (const auto& z : message_pass(g, p)) EXPECT_EQ(z, Vec(4, 0.0));
}

// ---- node_match --------------------------------------------------------------

GraphNode node(Vec repr) { return {{0, Side::kItem}, 1.0, std::move(repr)}; }

TEST(NodeMatch, Examples) {
  EXPECT_EQ(node_match(Vec{0.3, -2}, std::vector<GraphNode>{node({1, 1})}), (Vec{0.3, -2}));
  EXPECT_EQ(node_match(Vec{1, 2}, std::vector<GraphNode>{node({3, 4})}), (Vec{3, 8}));
  EXPECT_EQ(node_match(Vec{1, 2}, std::vector<GraphNode>{node({1, 1}), node({-1, -1})}), (Vec{0, 0}));
  EXPECT_THROW(node_match(Vec{1, 2}, std::vector<GraphNode>{}), ContractError);
}

TEST(NodeMatch, LinearityAgainstForward) {
  World w(3, 4);
  const ModelParams p = w.params(8, 5);
  const DataSample s = w.sample({1.0, 0.4, 2.0}, {1.0, -1.5, 0.7, 3.0});
  const auto r = predict(s, p);
  const auto [gu, gi] = build_graphs(s, p.embeddings);
  for (std::size_t i = 0; i < 3; ++i) expect_near(r.user_nodes[i].s, node_match(gu.nodes[i].repr, gi.nodes), 1e-12);
  for (std::size_t i = 0; i < 4; ++i) expect_near(r.item_nodes[i].s, node_match(gi.nodes[i].repr, gu.nodes), 1e-12);
}

// ---- fuse ------------------------------------------------------------------

TEST(Fuse, ZeroGruGivesZero) {
  World w(1, 1);
  ModelParams p = w.params(3, 1);
  std::vector<Parameter*> gp;
  p.gru->collect(gp);
  for (Parameter* x : gp) zero(*x);
  EXPECT_EQ(fuse(Vec{1, 2, 3}, Vec{-1, 0, 4}, Vec{0.5, 0.5, 0.5}, p), Vec(3, 0.0));
}

TEST(Fuse, MatchesGruOracle) {
  World w(1, 1);
  const ModelParams p = w.params(2, 29);
  const Vec e1{1, 0}, e2{0, 1};
  expect_near(fuse(e1, e2, e1, p), gru_oracle(*p.gru, {e1, e2, e1}), 1e-12);
  EXPECT_EQ(fuse(e1, e2, e1, p), fuse(e1, e2, e1, p));
}

TEST(Fuse, ShapeMismatch) {
  World w(1, 1);
  const ModelParams p = w.params(2, 29);
  EXPECT_THROW(fuse(Vec{1, 0}, Vec{1, 0, 0}, Vec{1, 0}, p), ShapeError);
}

TEST(Fuse, SumVariant) {
  World w(1, 1);
  VariantConfig v = VariantConfig::canonical();
  v.fuse = FuseKind::kSum;
  const ModelParams p = w.params(3, 1, v);
  EXPECT_EQ(fuse(Vec{1, 2, 3}, Vec(3, 0.0), Vec(3, 0.0), p), (Vec{1, 2, 3}));
}

// ---- graph representation and predict --------------------------------------

TEST(GraphRepresentation, TwoNodeComposition) {
  World w(2, 3);
  const ModelParams p = w.params(4, 6);
  const auto [gu, gi] = build_graphs(w.sample({1.0, 0.5}, {2.0, 1.0, 1.0}), p.embeddings);
  const Vec v = graph_representation(gu, gi.nodes, p);
  const auto z = message_pass(gu, p);
  Vec manual(4, 0.0);
  for (std::size_t i = 0; i < 2; ++i) {
    manual = add(manual, fuse(gu.nodes[i].repr, z[i], node_match(gu.nodes[i].repr, gi.nodes), p));
  }
  expect_near(v, manual, 1e-12);
}

TEST(GraphRepresentation, ZeroGru) {
  World w(2, 2);
  ModelParams p = w.params(4, 6);
  std::vector<Parameter*> gp;
  p.gru->collect(gp);
  for (Parameter* x : gp) zero(*x);
  const auto [gu, gi] = build_graphs(w.sample(), p.embeddings);
  EXPECT_EQ(graph_representation(gu, gi.nodes, p), Vec(4, 0.0));
  const auto r = predict(w.sample(), p);
  EXPECT_EQ(r.score, 0.0);
  EXPECT_EQ(r.probability(), 0.5);
}

TEST(Predict, ScoreIsDotOfRepresentations) {
  World w(3, 2);
  const ModelParams p = w.params(8, 12);
  const auto r = predict(w.sample({1, 2, 3}, {0.5, 1}), p);
  Tape t;
  EXPECT_EQ(r.score, t.dot(t.constant(r.user_repr), t.constant(r.item_repr)).scalar());
}

TEST(Predict, MatchesFullForwardOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    World w(2, 2);
    const ModelParams p = w.params(4, seed);
    const DataSample s = w.sample({1.0, 0.75}, {1.0, 1.25});
    const auto r = predict(s, p);
    const auto o = forward_oracle(s, p);
    expect_near(r.user_repr, o.user_repr, 1e-12);
    expect_near(r.item_repr, o.item_repr, 1e-12);
    EXPECT_NEAR(r.score, o.score, 1e-12);
  }
}

TEST(Predict, LargerInstanceMatchesOracle) {
  World w(4, 3);
  const ModelParams p = w.params(8, 77);
  const DataSample s = w.sample({1.0, 0.2, 1.7, 1.0}, {0.6, 1.0, 2.0});
  EXPECT_NEAR(predict(s, p).score, forward_oracle(s, p).score, 1e-12);
}

TEST(Predict, OrthogonalRepresentationsScoreZero) {
  // Single-node graphs under <Bi, Bi, SUM>: v_U = u + u (.) v, v_I = v + v (.) u.
  World w(1, 1);
  VariantConfig cfg{InnerKind::kBi, CrossKind::kBi, FuseKind::kSum, GraphMode::kSplit};
  ModelParams p = w.params(2, 1, cfg);
  p.embeddings.set(w.users[0], {1.0, 0.0});
  p.embeddings.set(w.items[0], {0.0, 1.0});
  EXPECT_EQ(predict(w.sample(), p).score, 0.0);
}

TEST(Predict, PermutationInvariantExactly) {
  World w(4, 3);
  const ModelParams p = w.params(8, 31);
  const DataSample s = w.sample({1.0, 0.3, 2.0, 1.1}, {1.0, 0.9, 1.4});
  const double base = predict(s, p).score;
  DataSample t = s;
  std::vector<std::size_t> uidx{0, 1, 2, 3};
  std::vector<std::size_t> iidx{0, 1, 2};
  int checked = 0;
  do {
    do {
      t.user.clear();
      t.item.clear();
      for (auto k : uidx) t.user.push_back(s.user[k]);
      for (auto k : iidx) t.item.push_back(s.item[k]);
      const auto r = predict(t, p);
      EXPECT_EQ(r.score, base);
      // Diagnostics follow the input order.
      for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(r.user_nodes[k].att, t.user[k].att);
      ++checked;
    } while (std::next_permutation(iidx.begin(), iidx.end()));
  } while (std::next_permutation(uidx.begin(), uidx.end()) && checked < 200);
  EXPECT_GT(checked, 100);
}

DataSample swap_roles(const DataSample& s) {
  DataSample t;
  for (const auto& p : s.item) t.user.push_back({{p.att.id, Side::kUser}, p.val});
  for (const auto& p : s.user) t.item.push_back({{p.att.id, Side::kItem}, p.val});
  t.label = s.label;
  return t;
}

TEST(Predict, RoleSwapInvariantExactly) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    World w(3, 4);
    const ModelParams p = w.params(8, seed);
    const DataSample s = w.sample({1.0, 0.5, 1.5}, {1.0, 2.0, 0.25, 1.0});
    EXPECT_EQ(predict(s, p).score, predict(swap_roles(s), p).score);
  }
}

TEST(Predict, SingleNodeReduction) {
  World w(1, 3);
  const ModelParams p = w.params(8, 4);
  const auto r = predict(w.sample({1.3}, {1.0, 0.5, 2.0}), p);
  ASSERT_EQ(r.user_nodes.size(), 1u);
  EXPECT_EQ(r.user_nodes[0].z, Vec(8, 0.0));
  EXPECT_EQ(r.user_repr, fuse(r.user_nodes[0].u, Vec(8, 0.0), r.user_nodes[0].s, p));
}

TEST(Predict, TrackedMatchesValueLevelPipeline) {
  World w(3, 2);
  const ModelParams p = w.params(8, 9);
  const DataSample s = w.sample({1, 2, 3}, {0.5, 1});
  const auto r = predict(s, p);
  const auto [gu, gi] = build_graphs(s, p.embeddings);
  expect_near(r.user_repr, graph_representation(gu, gi.nodes, p), 1e-12);
  expect_near(r.item_repr, graph_representation(gi, gu.nodes, p), 1e-12);
}

TEST(Predict, DiagnosticsCarryNodeValues) {
  World w(2, 2);
  const ModelParams p = w.params(4, 9);
  const DataSample s = w.sample({2.0, 1.0}, {1.0, 1.0});
  const auto r = predict(s, p);
  expect_near(r.user_nodes[0].u, rep(s.user[0], p.embeddings), 0.0);
  expect_near(r.user_nodes[1].fused, gru_oracle(*p.gru, {r.user_nodes[1].u, r.user_nodes[1].z, r.user_nodes[1].s}),
              1e-12);
}

TEST(Predict, GradientCheckCanonical) {
  World w(2, 2);
  ModelParams p = w.params(8, 41);
  const DataSample s = w.sample({1.0, 0.8}, {1.2, 1.0});
  auto reg = p.registry();
  const auto r = gradient_check(
      [&](Tape& t) { return t.bce_with_logit(forward(t, p, s).score, 1.0); }, reg, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(ModelParams, ShapesAndRegistry) {
  World w(2, 2);
  const ModelParams p = w.params(8, 1);
  ASSERT_TRUE(p.mlp && p.gru);
  EXPECT_EQ(p.mlp->input_size(), 16u);
  EXPECT_EQ(p.mlp->layers()[0].weight.rows(), 32u);
  EXPECT_EQ(p.mlp->output_size(), 8u);
  EXPECT_FALSE(p.cross_mlp.has_value());
  EXPECT_FALSE(p.fuse_mlp.has_value());
  EXPECT_EQ(p.registry().size(), 4u + 4u + 12u);
  EXPECT_EQ(p.registry().front(), &p.embeddings.at(w.users[0]));
}

TEST(ModelParams, Deterministic) {
  World w(2, 2);
  EXPECT_EQ(w.params(8, 3), w.params(8, 3));
  EXPECT_FALSE(w.params(8, 3) == w.params(8, 4));
}

TEST(ModelParams, MissingComponentIsConfigError) {
  World w(2, 2);
  const ModelParams p = w.params(4, 1);
  VariantConfig v = VariantConfig::canonical();
  v.fuse = FuseKind::kMlp;
  EXPECT_THROW(apply_variant(v, p, w.sample()), ConfigError);
  EXPECT_THROW(ModelParams::create(w.universe, ModelShape{4, 5}, VariantConfig::canonical(), 1), ConfigError);
}

}  // namespace
}  // namespace gmcf
