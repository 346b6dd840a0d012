#pragma once

// Node-matching GNN over a pair of attribute graphs.
//
// For every node u_i of one graph:
//   z_i = sum_{j in N(i)} f_neural(u_i, u_j)        inner interactions
//   s_i = sum_{j in other graph} u_i (.) u^_j       cross interactions
//   u'_i = GRU over the sequence [u_i, z_i, s_i], h0 = 0
// and the graph representation is v_G = sum_i u'_i. The score is
// y' = <v_G(user), v_G(item)>; the training probability is sigmoid(y').
//
// Everything is computed on a Tape so the same code path serves prediction,
// training and gradient checking. The value-level functions at the bottom
// wrap it for single-use calls.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gmcf/autodiff.hpp"
#include "gmcf/core.hpp"
#include "gmcf/graph.hpp"
#include "gmcf/random.hpp"
#include "gmcf/variant_config.hpp"

namespace gmcf {

struct DenseLayer {
  Parameter weight;  // out x in
  Parameter bias;    // out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Fully connected network with relu between layers and a linear output.
// hidden_layers = 0 is a single linear map.
class Mlp {
 public:
  Mlp() = default;
  static Mlp create(std::size_t in, std::size_t hidden, std::size_t out, std::size_t hidden_layers, Rng& rng);

  std::size_t input_size() const { return layers_.front().weight.cols(); }
  std::size_t output_size() const { return layers_.back().weight.rows(); }
  std::size_t hidden_layers() const { return layers_.size() - 1; }
  std::span<DenseLayer> layers() { return layers_; }
  std::span<const DenseLayer> layers() const { return layers_; }

  Var apply(Tape& tape, Var x) const;

  // Splits the first layer over a two-part input concat(a, b):
  // first_left(a) = W1[:, :|a|] a + b1 and first_right(b) = W1[:, |a|:] b,
  // so the first-layer pre-activation is first_left(a) + first_right(b).
  Var first_left(Tape& tape, Var a) const;
  Var first_right(Tape& tape, Var b, std::size_t left_size) const;
  // sum_j MLP(concat(a, b_j)) given first_left(a) and first_right(b_j) for
  // every j. Uses linearity of the output layer to apply it once.
  Var sum_over_pairs(Tape& tape, Var left, std::span<const Var> rights) const;

  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

// Single GRU cell, input size = hidden size = d:
//   r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n  = tanh(W_in x + b_in + r (.) (W_hn h + b_hn))
//   h' = (1 - z) (.) n + z (.) h
struct Gru {
  Parameter w_ir, w_iz, w_in, w_hr, w_hz, w_hn;
  Parameter b_ir, b_iz, b_in, b_hr, b_hz, b_hn;

  static Gru create(std::size_t dim, Rng& rng);

  // A missing h stands for the zero state.
  Var step(Tape& tape, Var x, std::optional<Var> h) const;
  // Final hidden state after the whole sequence, starting from zero.
  Var run(Tape& tape, std::span<const Var> sequence) const;

  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;

  friend bool operator==(const Gru&, const Gru&) = default;
};

struct ModelShape {
  std::size_t dim = 64;
  std::size_t mlp_depth = 1;  // hidden layers of f_neural, each 4d wide
};

// Full parameter set. Optional components exist only when the variant the
// parameters were created for uses them.
struct ModelParams {
  VariantConfig variant;
  ModelShape shape;
  EmbeddingTable embeddings;
  std::optional<Mlp> mlp;        // f_neural, 2d -> 4d -> d
  std::optional<Mlp> cross_mlp;  // second MLP for cross=mlp-separate
  std::optional<Mlp> fuse_mlp;   // fuse=mlp, 3d -> 4d -> d
  std::optional<Gru> gru;        // fuse=gru

  static ModelParams create(std::span<const AttributeId> universe, const ModelShape& shape,
                            const VariantConfig& variant, std::uint64_t seed);

  // Registry order: embeddings by id, mlp, cross_mlp, fuse_mlp, gru.
  std::vector<Parameter*> registry();
  std::vector<const Parameter*> registry() const;
  // Everything except the embedding table.
  std::vector<Parameter*> network_parameters();
  std::vector<const Parameter*> network_parameters() const;

  void zero_grad() const;
  // Throws ConfigError when a component required by the config is missing.
  void require(const VariantConfig& config) const;

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.variant == b.variant && a.shape.dim == b.shape.dim && a.shape.mlp_depth == b.shape.mlp_depth &&
           a.embeddings == b.embeddings && a.mlp == b.mlp && a.cross_mlp == b.cross_mlp &&
           a.fuse_mlp == b.fuse_mlp && a.gru == b.gru;
  }
};

// ---- tracked building blocks -------------------------------------------

struct TrackedNode {
  AttributeId att;
  Var u, z, s, fused;
};

struct TrackedForward {
  Var user_repr;
  Var item_repr;
  Var score;
  std::vector<TrackedNode> user_nodes;
  std::vector<TrackedNode> item_nodes;
};

std::vector<Var> track_nodes(Tape& tape, const EmbeddingTable& table, std::span<const AttributeValuePair> chars);

// z_i for every node of one graph (zero vector for a single-node graph).
std::vector<Var> track_message_pass(Tape& tape, const ModelParams& params, const VariantConfig& config,
                                    std::span<const Var> nodes);

// s_i for every node of one graph against the opposite node set.
std::vector<Var> track_node_match(Tape& tape, const ModelParams& params, const VariantConfig& config,
                                  std::span<const Var> nodes, std::span<const Var> opposite);

Var track_fuse(Tape& tape, const ModelParams& params, const VariantConfig& config, Var u, Var z, Var s);

TrackedForward forward(Tape& tape, const ModelParams& params, const DataSample& sample, const VariantConfig& config);
inline TrackedForward forward(Tape& tape, const ModelParams& params, const DataSample& sample) {
  return forward(tape, params, sample, params.variant);
}

// ---- value-level operations ---------------------------------------------

struct NodeDiagnostics {
  AttributeId att;
  std::vector<double> u, z, s, fused;
};

struct ForwardResult {
  std::vector<double> user_repr;
  std::vector<double> item_repr;
  double score = 0.0;  // <user_repr, item_repr> (sum + sum in union mode)
  std::vector<NodeDiagnostics> user_nodes;
  std::vector<NodeDiagnostics> item_nodes;

  double probability() const;
};

double sigmoid(double x);

// z_ij = MLP(concat(u_i, u_j)); z_ij and z_ji generally differ.
std::vector<double> inner_message(std::span<const double> u_i, std::span<const double> u_j, const ModelParams& params);

std::vector<std::vector<double>> message_pass(const AttributeGraph& graph, const ModelParams& params);

// s_i = sum_j u_i (.) u^_j, accumulated pair by pair.
std::vector<double> node_match(std::span<const double> u_i, std::span<const GraphNode> opposite);

std::vector<double> fuse(std::span<const double> u, std::span<const double> z, std::span<const double> s,
                         const ModelParams& params);

// f_G(G, V^): sum of fused node representations.
std::vector<double> graph_representation(const AttributeGraph& graph, std::span<const GraphNode> opposite,
                                         const ModelParams& params);

ForwardResult predict(const DataSample& sample, const ModelParams& params);
ForwardResult to_result(const TrackedForward& tracked);

}  // namespace gmcf
