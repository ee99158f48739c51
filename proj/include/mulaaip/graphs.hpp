#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mulaaip/basis.hpp"
#include "mulaaip/geometry.hpp"
#include "mulaaip/structure.hpp"
#include "mulaaip/tensor.hpp"

namespace mulaaip::graphs {

using Edge = std::pair<std::uint32_t, std::uint32_t>;  // (i, j): j is a neighbour of i

/// All ordered pairs (i, j), i != j, with |p_i - p_j| <= cutoff, sorted.
/// Uses a uniform cell grid of side `cutoff`.
std::vector<Edge> radius_edges(std::span<const Vec3> points, double cutoff);

struct EdgeGeometry {
  geometry::ResidueEdgeGeom residue;
  geometry::BackboneEdgeGeom backbone;
};

/// Per-protein residue graph. Edge geometry is expressed in the frame of
/// the first endpoint; edge features are the basis encodings of it.
struct StructuralGraph {
  std::string id;
  basis::BasisConfig basis;
  std::size_t num_nodes = 0;
  std::vector<int> node_class;                         // 0..19, 20 = unknown
  std::vector<std::array<double, 8>> side_chain_feat;  // torus embedding
  std::vector<Edge> edges;
  std::vector<EdgeGeometry> geometry;
  std::size_t degenerate_frames = 0;
  std::size_t skipped_pairs = 0;  // coincident anchors

  nn::Tensor edge_feat_residue;   // E x (N*M*M + N*M): TBF(d, theta, phi) ++ SBF(d, tau)
  nn::Tensor edge_feat_backbone;  // E x 3*N*M: SBF(d, alpha) ++ SBF(d, beta) ++ SBF(d, gamma)
  nn::Tensor edge_feat_side;      // E x N: RBF(d)

  std::size_t num_edges() const { return edges.size(); }
};

/// Throws Error{EmptyGraph} for a structure without residues.
StructuralGraph build_structural_graph(const ProteinStructure& structure,
                                       const basis::BasisConfig& cfg);

/// (Re)computes the three edge-feature matrices from the stored geometry.
void encode_edge_features(StructuralGraph& graph);

/// Compact binary form holding nodes, edges and raw edge geometry; features
/// are re-encoded on load.
std::string serialize_graph(const StructuralGraph& graph);
StructuralGraph deserialize_graph(std::string_view bytes);

// ---- relation graph ------------------------------------------------------

/// u.v / (|u||v|) clamped to [-1, 1]. Throws Error{ZeroVector}.
double cosine(std::span<const double> u, std::span<const double> v);

struct RelationGraph {
  std::vector<std::string> node_ids;
  nn::Tensor node_emb;       // n x dim
  std::vector<Edge> pattern; // off-diagonal entries kept after sparsification, symmetric, sorted
  std::vector<double> weights;  // cosine similarity per pattern entry
  std::size_t knn_k = 0;

  std::size_t size() const { return node_ids.size(); }
  /// Dense view; self-loops are 1.
  nn::Tensor dense_adjacency() const;
  /// Sum of absolute adjacency entries, self-loops included.
  double l1_norm() const;
};

/// Dense cosine matrix, then per row the knn_k largest off-diagonal entries
/// (ties to the lower index), symmetrised by union. Throws Error{ZeroVector}
/// or Error{DimMismatch}.
RelationGraph build_relation_graph(std::vector<std::string> ids, const nn::Tensor& embeddings,
                                   std::size_t knn_k);

/// The sparsity pattern alone, used when edge weights are recomputed
/// inside the autodiff graph.
std::vector<Edge> knn_pattern(const nn::Tensor& similarity, std::size_t knn_k);

// ---- embedding files -----------------------------------------------------

struct EmbeddingMatrix {
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;  // row-major

  std::vector<double> mean_pool() const;
  bool operator==(const EmbeddingMatrix&) const = default;
};

/// Insertion-ordered id -> per-residue embedding matrix.
class EmbeddingStore {
 public:
  /// Throws Error{DuplicateId} or Error{DimMismatch}.
  void add(std::string id, EmbeddingMatrix matrix);
  const EmbeddingMatrix* find(std::string_view id) const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, EmbeddingMatrix>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, EmbeddingMatrix>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
};

inline constexpr std::uint32_t kEmbeddingVersion = 1;

/// "PLMB", u32 version, u32 count, records of (u32 id_len, id, u32 rows,
/// u32 dim, rows*dim float32), little-endian.
EmbeddingStore read_embeddings(std::string_view bytes);
std::string write_embeddings(const EmbeddingStore& store);

}  // namespace mulaaip::graphs
