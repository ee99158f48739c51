#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mulaaip/autodiff.hpp"
#include "mulaaip/graphs.hpp"

namespace mulaaip::layers {

using nn::Var;

/// x W (+ b), weights stored fan_in x fan_out.
struct Linear {
  nn::Parameter* weight = nullptr;
  nn::Parameter* bias = nullptr;

  Var operator()(nn::Tape& tape, Var x) const;
  std::size_t in_dim() const { return weight->value.rows(); }
  std::size_t out_dim() const { return weight->value.cols(); }
};

Linear make_linear(nn::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                   Rng& rng, bool with_bias = true);

/// Directed message list: `source[e]` sends to `target[e]`.
struct EdgeIndex {
  std::vector<std::size_t> target;
  std::vector<std::size_t> source;
  std::size_t num_nodes = 0;

  static EdgeIndex from_edges(std::span<const graphs::Edge> edges, std::size_t num_nodes);
};

/// Single-head attention block with edge-conditioned scores.
struct GatBlock {
  nn::Parameter* theta_s = nullptr;  // in x out
  nn::Parameter* theta_t = nullptr;  // in x out
  nn::Parameter* theta_e = nullptr;  // edge_dim x out
  nn::Parameter* a_s = nullptr;      // out x 1
  nn::Parameter* a_t = nullptr;
  nn::Parameter* a_e = nullptr;
  double leaky_slope = 0.2;
};

GatBlock make_gat_block(nn::ParameterStore& store, const std::string& prefix, std::size_t in,
                        std::size_t out, std::size_t edge_dim, Rng& rng, double leaky_slope = 0.2);

struct GatOutput {
  Var nodes;      // n x out
  Var attention;  // E x 1, sums to 1 over each target's incoming edges
};

/// score_ij = LeakyReLU(a_s.(Theta_s v_i) + a_t.(Theta_t v_j) + a_e.(Theta_e e_ij)),
/// alpha = softmax of the scores over each node's neighbours,
/// v_i' = sum_j alpha_ij Theta_t v_j. Nodes without neighbours get zeros.
GatOutput gat_forward(nn::Tape& tape, const GatBlock& block, Var node_feats, const EdgeIndex& edges,
                      Var edge_feats);

/// Sum over nodes. Throws Error{EmptyGraph} for zero nodes.
Var readout(Var node_feats);

/// Subtract the column mean, then rescale so the mean squared row norm is s^2.
/// A (numerically) zero centred matrix maps to zeros.
Var center_and_scale(Var h, double s);

/// Relation-graph message passing without the weight matrix:
/// out_i = sum_{j in N(i) + i} e_ij / sqrt(d_i d_j) h_j with e_ii = 1 and
/// d_i = max(1, 1 + sum_{j in N(i)} e_ij). `weights` holds e for `pattern`.
Var gcn_propagate(Var h, std::span<const graphs::Edge> pattern, Var weights);

struct NormAdaptiveGcn {
  std::vector<nn::Parameter*> theta;  // one bias-free matrix per layer
  double scale = 1.0;                 // s of the center-and-scale step
  double dropout = 0.0;
  double leaky_slope = 0.2;

  std::size_t num_layers() const { return theta.size(); }
};

NormAdaptiveGcn make_gcn(nn::ParameterStore& store, const std::string& prefix, std::size_t in,
                         std::size_t hidden, std::size_t layers, Rng& rng, double scale = 1.0,
                         double dropout = 0.0, double leaky_slope = 0.2);

/// Each layer: propagate, multiply by Theta. Between layers:
/// center-and-scale, LeakyReLU, dropout.
Var gcn_forward(nn::Tape& tape, const NormAdaptiveGcn& net, Var h,
                std::span<const graphs::Edge> pattern, Var weights, Rng& rng, bool training);
/// Same, with the constant adjacency of a built relation graph.
Var gcn_forward(nn::Tape& tape, const NormAdaptiveGcn& net, const graphs::RelationGraph& relation,
                Var h, Rng& rng, bool training);

/// Cosine similarity for each pattern entry, differentiable in `h`.
Var pattern_cosine(Var h, std::span<const graphs::Edge> pattern);

}  // namespace mulaaip::layers
