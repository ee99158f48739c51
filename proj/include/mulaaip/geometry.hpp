#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "mulaaip/structure.hpp"
#include "mulaaip/vec3.hpp"

namespace mulaaip::geometry {

/// Right-handed orthonormal frame centred on a residue anchor. x points to
/// the backbone N, z is normal to the N-CA-C plane.
struct LocalFrame {
  Vec3 origin;
  Vec3 x_axis{1, 0, 0};
  Vec3 y_axis{0, 1, 0};
  Vec3 z_axis{0, 0, 1};

  /// Components of a world-space offset in this frame.
  Vec3 to_local(const Vec3& offset) const {
    return {dot(offset, x_axis), dot(offset, y_axis), dot(offset, z_axis)};
  }
};

struct FrameResult {
  LocalFrame frame;
  bool degenerate = false;  // true when the global-axes fallback was used
};

struct ResidueEdgeGeom {
  double d = 0;      // Å
  double theta = 0;  // azimuth in the xy-plane of frame i, [-pi, pi]
  double phi = 0;    // angle from +z of frame i, [0, pi]
  double tau = 0;    // dihedral N_i, CA_i, CA_j, N_j, [-pi, pi]
};

struct BackboneEdgeGeom {
  double alpha = 0;
  double beta = 0;
  double gamma = 0;
  bool degenerate = false;  // z axes parallel, line of nodes fell back to x_i
};

struct SideChainGeom {
  std::array<double, 4> chi{};
  std::array<bool, 4> mask{};
};

inline constexpr double kCollinearTolerance = 1e-8;

/// Frame from the N, CA and C atoms of a residue. Throws
/// Error{DegenerateFrame} when an atom is missing or the three are collinear.
LocalFrame build_frame(const Vec3& n, const Vec3& ca, const Vec3& c);
LocalFrame build_frame(const Residue& residue);

/// Never throws: a missing C is replaced by the direction to `next_anchor`
/// (when given); anything else unusable yields global axes at the anchor.
FrameResult build_frame_or_fallback(const Residue& residue, const Vec3* next_anchor);

/// Throws Error{CoincidentAnchors} when the anchors coincide.
ResidueEdgeGeom residue_edge_geom(const LocalFrame& frame_i, const Vec3& anchor_j,
                                  const LocalFrame& frame_j);

BackboneEdgeGeom backbone_edge_geom(const LocalFrame& frame_i, const LocalFrame& frame_j);

/// Signed dihedral in [-pi, pi]. Throws Error{DegenerateDihedral} when either
/// (p1, p2, p3) or (p2, p3, p4) is collinear.
double dihedral(const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& p4);

SideChainGeom side_chain_torsions(const Residue& residue);

/// CB followed by the last atom of each chi quadruple, e.g. LYS gives
/// CB CG CD CE NZ. Empty for GLY, ALA and unknown names.
std::vector<std::string> torsion_path_atoms(std::string_view residue_name);

/// (sin chi1, cos chi1, ..., sin chi4, cos chi4); masked slots are (0, 0).
std::array<double, 8> torus_embed(const SideChainGeom& geom);

}  // namespace mulaaip::geometry
