#include "mulaaip/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "mulaaip/binary_io.hpp"
#include "mulaaip/error.hpp"

namespace mulaaip::graphs {

std::vector<Edge> radius_edges(std::span<const Vec3> points, double cutoff) {
  std::vector<Edge> edges;
  if (points.empty()) return edges;
  Vec3 lo = points[0];
  for (const auto& p : points) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
  }
  using Cell = std::tuple<long, long, long>;
  auto cell_of = [&](const Vec3& p) {
    return Cell{static_cast<long>(std::floor((p.x - lo.x) / cutoff)),
                static_cast<long>(std::floor((p.y - lo.y) / cutoff)),
                static_cast<long>(std::floor((p.z - lo.z) / cutoff))};
  };
  std::map<Cell, std::vector<std::uint32_t>> grid;
  for (std::uint32_t i = 0; i < points.size(); ++i) grid[cell_of(points[i])].push_back(i);

  for (std::uint32_t i = 0; i < points.size(); ++i) {
    const auto [cx, cy, cz] = cell_of(points[i]);
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find(Cell{cx + dx, cy + dy, cz + dz});
          if (it == grid.end()) continue;
          for (std::uint32_t j : it->second) {
            if (j != i && distance(points[i], points[j]) <= cutoff) edges.emplace_back(i, j);
          }
        }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

StructuralGraph build_structural_graph(const ProteinStructure& structure,
                                       const basis::BasisConfig& cfg) {
  cfg.validate();
  StructuralGraph g;
  g.id = structure.id;
  g.basis = cfg;

  std::vector<Vec3> anchors;
  std::vector<geometry::LocalFrame> frames;
  for (const auto& chain : structure.chains) {
    for (std::size_t r = 0; r < chain.residues.size(); ++r) {
      const Residue& residue = chain.residues[r];
      const Vec3* next = r + 1 < chain.residues.size() ? &chain.residues[r + 1].anchor : nullptr;
      const auto fr = geometry::build_frame_or_fallback(residue, next);
      if (fr.degenerate) ++g.degenerate_frames;
      frames.push_back(fr.frame);
      anchors.push_back(residue.anchor);
      g.node_class.push_back(amino_acid_class(residue.name));
      g.side_chain_feat.push_back(geometry::torus_embed(geometry::side_chain_torsions(residue)));
    }
  }
  g.num_nodes = anchors.size();
  if (g.num_nodes == 0) throw Error(ErrorCode::EmptyGraph, "structure '" + structure.id + "' has no residues");

  for (const auto& [i, j] : radius_edges(anchors, cfg.cutoff)) {
    EdgeGeometry eg;
    try {
      eg.residue = geometry::residue_edge_geom(frames[i], anchors[j], frames[j]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CoincidentAnchors) throw;
      ++g.skipped_pairs;
      continue;
    }
    eg.backbone = geometry::backbone_edge_geom(frames[i], frames[j]);
    g.edges.emplace_back(i, j);
    g.geometry.push_back(eg);
  }
  encode_edge_features(g);
  return g;
}

void encode_edge_features(StructuralGraph& g) {
  const auto basis = basis::cached_basis(g.basis);
  const auto& cfg = g.basis;
  const std::size_t E = g.edges.size();
  const std::size_t res_dim = cfg.tbf_size() + cfg.sbf_size();
  const std::size_t bb_dim = 3 * cfg.sbf_size();
  std::vector<double> res, bb, side;
  res.reserve(E * res_dim);
  bb.reserve(E * bb_dim);
  side.reserve(E * cfg.rbf_size());
  for (const auto& eg : g.geometry) {
    const double d = eg.residue.d;
    basis->append_tbf(d, eg.residue.theta, eg.residue.phi, res);
    basis->append_sbf(d, eg.residue.tau, res);
    basis->append_sbf(d, eg.backbone.alpha, bb);
    basis->append_sbf(d, eg.backbone.beta, bb);
    basis->append_sbf(d, eg.backbone.gamma, bb);
    basis->append_rbf(d, side);
  }
  g.edge_feat_residue = nn::Tensor(E, res_dim, std::move(res));
  g.edge_feat_backbone = nn::Tensor(E, bb_dim, std::move(bb));
  g.edge_feat_side = nn::Tensor(E, cfg.rbf_size(), std::move(side));
}

namespace {
constexpr std::uint32_t kGraphVersion = 1;
}

std::string serialize_graph(const StructuralGraph& g) {
  ByteWriter w;
  w.bytes("MSGF");
  w.u32(kGraphVersion);
  w.f64(g.basis.cutoff);
  w.u32(static_cast<std::uint32_t>(g.basis.num_radial));
  w.u32(static_cast<std::uint32_t>(g.basis.num_spherical));
  w.u32(static_cast<std::uint32_t>(g.basis.envelope_exponent));
  w.u8(g.basis.envelope_enabled ? 1 : 0);
  w.str(g.id);
  w.u32(static_cast<std::uint32_t>(g.num_nodes));
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    w.u32(static_cast<std::uint32_t>(g.node_class[i]));
    for (double v : g.side_chain_feat[i]) w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(g.degenerate_frames));
  w.u32(static_cast<std::uint32_t>(g.skipped_pairs));
  w.u32(static_cast<std::uint32_t>(g.edges.size()));
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& eg = g.geometry[e];
    w.u32(g.edges[e].first);
    w.u32(g.edges[e].second);
    for (double v : {eg.residue.d, eg.residue.theta, eg.residue.phi, eg.residue.tau,
                     eg.backbone.alpha, eg.backbone.beta, eg.backbone.gamma}) {
      w.f64(v);
    }
    w.u8(eg.backbone.degenerate ? 1 : 0);
  }
  return std::move(w).take();
}

StructuralGraph deserialize_graph(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != "MSGF") throw Error(ErrorCode::BadMagic, "not a graph cache file");
  if (const auto v = r.u32(); v != kGraphVersion) {
    throw Error(ErrorCode::VersionMismatch, "graph cache version " + std::to_string(v));
  }
  StructuralGraph g;
  g.basis.cutoff = r.f64();
  g.basis.num_radial = static_cast<int>(r.u32());
  g.basis.num_spherical = static_cast<int>(r.u32());
  g.basis.envelope_exponent = static_cast<int>(r.u32());
  g.basis.envelope_enabled = r.u8() != 0;
  g.id = r.str();
  g.num_nodes = r.u32();
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    g.node_class.push_back(static_cast<int>(r.u32()));
    std::array<double, 8> f{};
    for (auto& v : f) v = r.f64();
    g.side_chain_feat.push_back(f);
  }
  g.degenerate_frames = r.u32();
  g.skipped_pairs = r.u32();
  const std::uint32_t E = r.u32();
  for (std::uint32_t e = 0; e < E; ++e) {
    const std::uint32_t i = r.u32();
    const std::uint32_t j = r.u32();
    if (i >= g.num_nodes || j >= g.num_nodes) throw Error(ErrorCode::TruncatedRecord, "edge endpoint out of range");
    EdgeGeometry eg;
    eg.residue.d = r.f64();
    eg.residue.theta = r.f64();
    eg.residue.phi = r.f64();
    eg.residue.tau = r.f64();
    eg.backbone.alpha = r.f64();
    eg.backbone.beta = r.f64();
    eg.backbone.gamma = r.f64();
    eg.backbone.degenerate = r.u8() != 0;
    g.edges.emplace_back(i, j);
    g.geometry.push_back(eg);
  }
  if (!r.at_end()) throw Error(ErrorCode::TruncatedRecord, "trailing bytes in graph cache");
  encode_edge_features(g);
  return g;
}

// ---- relation graph ------------------------------------------------------

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::DimMismatch, "cosine of vectors with different lengths");
  double su = 0.0, sv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    su = std::max(su, std::abs(u[k]));
    sv = std::max(sv, std::abs(v[k]));
  }
  if (su == 0.0 || sv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  // Scaled by the largest magnitude so squares neither overflow nor underflow.
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double a = u[k] / su, b = v[k] / sv;
    uv += a * b;
    uu += a * a;
    vv += b * b;
  }
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

nn::Tensor RelationGraph::dense_adjacency() const {
  const std::size_t n = size();
  nn::Tensor a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  for (std::size_t e = 0; e < pattern.size(); ++e) a(pattern[e].first, pattern[e].second) = weights[e];
  return a;
}

double RelationGraph::l1_norm() const {
  double s = static_cast<double>(size());
  for (double w : weights) s += std::abs(w);
  return s;
}

std::vector<Edge> knn_pattern(const nn::Tensor& sim, std::size_t knn_k) {
  const std::size_t n = sim.rows();
  std::vector<std::vector<bool>> keep(n, std::vector<bool>(n, false));
  std::vector<std::uint32_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::uint32_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    const std::size_t k = std::min(knn_k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        if (sim(i, a) != sim(i, b)) return sim(i, a) > sim(i, b);
                        return a < b;
                      });
    for (std::size_t r = 0; r < k; ++r) {
      keep[i][order[r]] = true;
      keep[order[r]][i] = true;
    }
  }
  std::vector<Edge> pattern;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j)
      if (keep[i][j]) pattern.emplace_back(i, j);
  return pattern;
}

RelationGraph build_relation_graph(std::vector<std::string> ids, const nn::Tensor& emb,
                                   std::size_t knn_k) {
  const std::size_t n = emb.rows();
  if (n == 0 || ids.size() != n) throw Error(ErrorCode::DimMismatch, "relation graph needs one id per embedding row");
  const std::size_t dim = emb.cols();
  auto row = [&](std::size_t i) { return std::span<const double>(emb.values().data() + i * dim, dim); };
  nn::Tensor sim(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    sim(i, i) = cosine(row(i), row(i));
    for (std::size_t j = i + 1; j < n; ++j) sim(i, j) = sim(j, i) = cosine(row(i), row(j));
  }
  RelationGraph g;
  g.node_ids = std::move(ids);
  g.node_emb = emb;
  g.knn_k = knn_k;
  g.pattern = knn_pattern(sim, knn_k);
  for (const auto& [i, j] : g.pattern) g.weights.push_back(sim(i, j));
  return g;
}

// ---- embedding files -----------------------------------------------------

std::vector<double> EmbeddingMatrix::mean_pool() const {
  std::vector<double> out(dim, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < dim; ++c) out[c] += values[r * dim + c];
  for (auto& v : out) v /= static_cast<double>(rows);
  return out;
}

void EmbeddingStore::add(std::string id, EmbeddingMatrix matrix) {
  if (index_.contains(id)) throw Error(ErrorCode::DuplicateId, "embedding id '" + id + "' appears twice");
  if (matrix.rows == 0) throw Error(ErrorCode::DimMismatch, "embedding '" + id + "' has no rows");
  if (matrix.values.size() != std::size_t{matrix.rows} * matrix.dim) {
    throw Error(ErrorCode::DimMismatch, "embedding '" + id + "' value count does not match rows x dim");
  }
  if (!entries_.empty() && matrix.dim != dim_) {
    throw Error(ErrorCode::DimMismatch, "embedding '" + id + "' has dim " + std::to_string(matrix.dim) +
                                            ", store has " + std::to_string(dim_));
  }
  dim_ = matrix.dim;
  index_.emplace(id, entries_.size());
  entries_.emplace_back(std::move(id), std::move(matrix));
}

const EmbeddingMatrix* EmbeddingStore::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &entries_[it->second].second;
}

EmbeddingStore read_embeddings(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != "PLMB") throw Error(ErrorCode::BadMagic, "not an embedding file");
  if (const auto v = r.u32(); v != kEmbeddingVersion) {
    throw Error(ErrorCode::VersionMismatch, "embedding file version " + std::to_string(v));
  }
  const std::uint32_t count = r.u32();
  EmbeddingStore store;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string id = r.str();
    EmbeddingMatrix m;
    m.rows = r.u32();
    m.dim = r.u32();
    const std::uint64_t n = std::uint64_t{m.rows} * m.dim;
    if (n * 4 > r.remaining()) throw Error(ErrorCode::TruncatedRecord, "embedding '" + id + "' is truncated");
    m.values.resize(n);
    for (auto& v : m.values) v = r.f32();
    store.add(std::move(id), std::move(m));
  }
  if (!r.at_end()) throw Error(ErrorCode::TruncatedRecord, "trailing bytes after embedding records");
  return store;
}

std::string write_embeddings(const EmbeddingStore& store) {
  ByteWriter w;
  w.bytes("PLMB");
  w.u32(kEmbeddingVersion);
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& [id, m] : store.entries()) {
    w.str(id);
    w.u32(m.rows);
    w.u32(m.dim);
    for (float v : m.values) w.f32(v);
  }
  return std::move(w).take();
}

}  // namespace mulaaip::graphs
