#include "mulaaip/layers.hpp"

#include <cmath>

#include "mulaaip/error.hpp"

namespace mulaaip::layers {

Var Linear::operator()(nn::Tape& tape, Var x) const {
  Var y = nn::matmul(x, tape.parameter(*weight));
  return bias ? nn::add_row(y, tape.parameter(*bias)) : y;
}

Linear make_linear(nn::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                   Rng& rng, bool with_bias) {
  Linear l;
  l.weight = &store.add_xavier(name + ".weight", in, out, rng);
  if (with_bias) l.bias = &store.add_zeros(name + ".bias", 1, out);
  return l;
}

EdgeIndex EdgeIndex::from_edges(std::span<const graphs::Edge> edges, std::size_t num_nodes) {
  EdgeIndex idx;
  idx.num_nodes = num_nodes;
  idx.target.reserve(edges.size());
  idx.source.reserve(edges.size());
  for (const auto& [i, j] : edges) {
    idx.target.push_back(i);
    idx.source.push_back(j);
  }
  return idx;
}

GatBlock make_gat_block(nn::ParameterStore& store, const std::string& prefix, std::size_t in,
                        std::size_t out, std::size_t edge_dim, Rng& rng, double leaky_slope) {
  GatBlock b;
  b.theta_s = &store.add_xavier(prefix + ".theta_s", in, out, rng);
  b.theta_t = &store.add_xavier(prefix + ".theta_t", in, out, rng);
  b.theta_e = &store.add_xavier(prefix + ".theta_e", edge_dim, out, rng);
  b.a_s = &store.add_xavier(prefix + ".a_s", out, 1, rng);
  b.a_t = &store.add_xavier(prefix + ".a_t", out, 1, rng);
  b.a_e = &store.add_xavier(prefix + ".a_e", out, 1, rng);
  b.leaky_slope = leaky_slope;
  return b;
}

GatOutput gat_forward(nn::Tape& tape, const GatBlock& block, Var v, const EdgeIndex& edges,
                      Var edge_feats) {
  const std::size_t n = v.rows();
  if (n != edges.num_nodes || edge_feats.rows() != edges.target.size() ||
      v.cols() != block.theta_s->value.rows() || edge_feats.cols() != block.theta_e->value.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "gat_forward: node " + v.value().shape_string() + ", edge " +
                                              edge_feats.value().shape_string() + " inputs do not fit the block");
  }
  Var theta_t = tape.parameter(*block.theta_t);
  Var transformed = nn::matmul(v, theta_t);
  // a.(Theta x) is evaluated as x.(Theta a).
  Var self_score = nn::matmul(v, nn::matmul(tape.parameter(*block.theta_s), tape.parameter(*block.a_s)));
  Var nbr_score = nn::matmul(transformed, tape.parameter(*block.a_t));
  Var edge_score =
      nn::matmul(edge_feats, nn::matmul(tape.parameter(*block.theta_e), tape.parameter(*block.a_e)));
  Var logits = nn::add(nn::add(nn::gather_rows(self_score, edges.target),
                               nn::gather_rows(nbr_score, edges.source)),
                       edge_score);
  logits = nn::leaky_relu(logits, block.leaky_slope);
  Var alpha = nn::softmax_segmented(logits, edges.target, n);
  Var messages = nn::mul_col(nn::gather_rows(transformed, edges.source), alpha);
  return {nn::scatter_add_rows(messages, edges.target, n), alpha};
}

Var readout(Var node_feats) {
  if (node_feats.rows() == 0) throw Error(ErrorCode::EmptyGraph, "readout over zero nodes");
  return nn::sum_rows(node_feats);
}

Var center_and_scale(Var h, double s) {
  nn::Tape& tape = *h.tape;
  const std::size_t n = h.rows();
  Var centred = nn::add_row(h, nn::scale(nn::mean_rows(h), -1.0));
  Var frob2 = nn::sum_all(nn::square(centred));
  double total = 0.0;
  for (double x : h.value().values()) total += x * x;
  if (frob2.value()[0] <= 1e-24 * total || frob2.value()[0] == 0.0) {
    return tape.constant(nn::Tensor(h.value().shape(), 0.0));
  }
  Var factor = nn::scale(nn::pow(frob2, -0.5), s * std::sqrt(static_cast<double>(n)));
  return nn::mul_scalar(centred, factor);
}

Var gcn_propagate(Var h, std::span<const graphs::Edge> pattern, Var weights) {
  const std::size_t n = h.rows();
  if (weights.rows() != pattern.size() || weights.cols() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "gcn_propagate: weights " + weights.value().shape_string() +
                                              " for " + std::to_string(pattern.size()) + " pattern entries");
  }
  const EdgeIndex idx = EdgeIndex::from_edges(pattern, n);
  Var degree = nn::max_scalar(nn::add_scalar(nn::scatter_add_rows(weights, idx.target, n), 1.0), 1.0);
  Var inv_sqrt = nn::pow(degree, -0.5);
  Var self_term = nn::mul_col(h, nn::pow(degree, -1.0));
  if (pattern.empty()) return self_term;
  Var coef = nn::mul(nn::mul(weights, nn::gather_rows(inv_sqrt, idx.target)),
                     nn::gather_rows(inv_sqrt, idx.source));
  Var messages = nn::mul_col(nn::gather_rows(h, idx.source), coef);
  return nn::add(nn::scatter_add_rows(messages, idx.target, n), self_term);
}

NormAdaptiveGcn make_gcn(nn::ParameterStore& store, const std::string& prefix, std::size_t in,
                         std::size_t hidden, std::size_t layers, Rng& rng, double scale, double dropout,
                         double leaky_slope) {
  NormAdaptiveGcn net;
  for (std::size_t l = 0; l < layers; ++l) {
    net.theta.push_back(&store.add_xavier(prefix + ".theta" + std::to_string(l), l == 0 ? in : hidden, hidden, rng));
  }
  net.scale = scale;
  net.dropout = dropout;
  net.leaky_slope = leaky_slope;
  return net;
}

Var gcn_forward(nn::Tape& tape, const NormAdaptiveGcn& net, Var h, std::span<const graphs::Edge> pattern,
                Var weights, Rng& rng, bool training) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    h = nn::matmul(gcn_propagate(h, pattern, weights), tape.parameter(*net.theta[l]));
    if (l + 1 < net.num_layers()) {
      h = center_and_scale(h, net.scale);
      h = nn::leaky_relu(h, net.leaky_slope);
      h = nn::dropout(h, net.dropout, rng, training);
    }
  }
  return h;
}

Var gcn_forward(nn::Tape& tape, const NormAdaptiveGcn& net, const graphs::RelationGraph& relation, Var h,
                Rng& rng, bool training) {
  Var weights = tape.constant(nn::Tensor(relation.weights.size(), 1, relation.weights));
  return gcn_forward(tape, net, h, relation.pattern, weights, rng, training);
}

Var pattern_cosine(Var h, std::span<const graphs::Edge> pattern) {
  const EdgeIndex idx = EdgeIndex::from_edges(pattern, h.rows());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    bool zero = true;
    for (std::size_t j = 0; j < h.cols() && zero; ++j) zero = h.value()(i, j) == 0.0;
    if (zero) throw Error(ErrorCode::ZeroVector, "relation embedding row " + std::to_string(i) + " is zero");
  }
  Var inv_norm = nn::pow(nn::sum_cols(nn::square(h)), -0.5);
  Var unit = nn::mul_col(h, inv_norm);
  Var dots = nn::sum_cols(nn::mul(nn::gather_rows(unit, idx.target), nn::gather_rows(unit, idx.source)));
  return nn::clamp(dots, -1.0, 1.0);
}

}  // namespace mulaaip::layers
