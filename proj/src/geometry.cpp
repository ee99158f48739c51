#include "mulaaip/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mulaaip/error.hpp"

namespace mulaaip::geometry {
namespace {

using AtomQuad = std::array<const char*, 4>;

// Standard chi-defining atom quadruples.
const std::map<std::string, std::vector<AtomQuad>>& chi_table() {
  static const std::map<std::string, std::vector<AtomQuad>> table = {
      {"ARG", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "CD"}, {"CB", "CG", "CD", "NE"}, {"CG", "CD", "NE", "CZ"}}},
      {"ASN", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "OD1"}}},
      {"ASP", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "OD1"}}},
      {"CYS", {{"N", "CA", "CB", "SG"}}},
      {"GLN", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "CD"}, {"CB", "CG", "CD", "OE1"}}},
      {"GLU", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "CD"}, {"CB", "CG", "CD", "OE1"}}},
      {"HIS", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "ND1"}}},
      {"ILE", {{"N", "CA", "CB", "CG1"}, {"CA", "CB", "CG1", "CD1"}}},
      {"LEU", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "CD1"}}},
      {"LYS", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "CD"}, {"CB", "CG", "CD", "CE"}, {"CG", "CD", "CE", "NZ"}}},
      {"MET", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "SD"}, {"CB", "CG", "SD", "CE"}}},
      {"PHE", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "CD1"}}},
      {"PRO", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "CD"}}},
      {"SER", {{"N", "CA", "CB", "OG"}}},
      {"THR", {{"N", "CA", "CB", "OG1"}}},
      {"TRP", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "CD1"}}},
      {"TYR", {{"N", "CA", "CB", "CG"}, {"CA", "CB", "CG", "CD1"}}},
      {"VAL", {{"N", "CA", "CB", "CG1"}}},
  };
  return table;
}

bool nearly_parallel(const Vec3& a, const Vec3& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na < kCollinearTolerance || nb < kCollinearTolerance) return true;
  return norm(cross(a / na, b / nb)) < kCollinearTolerance;
}

// Angle from u to v measured counter-clockwise about axis; u, v assumed
// orthogonal to axis up to rounding.
double signed_angle(const Vec3& u, const Vec3& v, const Vec3& axis) {
  return std::atan2(dot(cross(u, v), axis), dot(u, v));
}

LocalFrame global_axes(const Vec3& origin) {
  LocalFrame f;
  f.origin = origin;
  return f;
}

}  // namespace

LocalFrame build_frame(const Vec3& n, const Vec3& ca, const Vec3& c) {
  const Vec3 x_raw = n - ca;
  const Vec3 t_raw = c - ca;
  if (nearly_parallel(x_raw, t_raw)) {
    throw Error(ErrorCode::DegenerateFrame, "N, CA and C are collinear");
  }
  LocalFrame f;
  f.origin = ca;
  f.x_axis = normalized(x_raw);
  f.z_axis = normalized(cross(x_raw, t_raw));
  // x cross z points along -y; flip to keep the triad right-handed.
  f.y_axis = normalized(cross(f.z_axis, f.x_axis));
  return f;
}

LocalFrame build_frame(const Residue& residue) {
  const Atom* n = residue.find_atom("N");
  const Atom* ca = residue.find_atom("CA");
  const Atom* c = residue.find_atom("C");
  if (!n || !ca || !c) {
    throw Error(ErrorCode::DegenerateFrame, "residue " + residue.name + " lacks N, CA or C");
  }
  return build_frame(n->position, ca->position, c->position);
}

FrameResult build_frame_or_fallback(const Residue& residue, const Vec3* next_anchor) {
  const Atom* n = residue.find_atom("N");
  const Atom* ca = residue.find_atom("CA");
  const Atom* c = residue.find_atom("C");
  if (n && ca) {
    const Vec3* t_target = c ? &c->position : next_anchor;
    if (t_target && !nearly_parallel(n->position - ca->position, *t_target - ca->position)) {
      return {build_frame(n->position, ca->position, *t_target), false};
    }
  }
  return {global_axes(residue.anchor), true};
}

ResidueEdgeGeom residue_edge_geom(const LocalFrame& frame_i, const Vec3& anchor_j,
                                  const LocalFrame& frame_j) {
  const Vec3 offset = anchor_j - frame_i.origin;
  const Vec3 local = frame_i.to_local(offset);
  ResidueEdgeGeom g;
  g.d = norm(local);
  if (g.d < kCollinearTolerance) {
    throw Error(ErrorCode::CoincidentAnchors, "edge endpoints coincide");
  }
  const double planar = std::hypot(local.x, local.y);
  g.phi = std::atan2(planar, local.z);
  g.theta = planar <= 1e-12 * g.d ? 0.0 : std::atan2(local.y, local.x);
  // Edge rotation: dihedral of (N_i, CA_i, CA_j, N_j). The dihedral only
  // depends on directions, so the frame x axes stand in for the N atoms.
  const Vec3 a = frame_i.origin + frame_i.x_axis;
  const Vec3 b = frame_j.origin + frame_j.x_axis;
  if (nearly_parallel(frame_i.x_axis, offset) || nearly_parallel(frame_j.x_axis, offset)) {
    g.tau = 0.0;
  } else {
    g.tau = dihedral(a, frame_i.origin, frame_j.origin, b);
  }
  return g;
}

BackboneEdgeGeom backbone_edge_geom(const LocalFrame& frame_i, const LocalFrame& frame_j) {
  BackboneEdgeGeom g;
  Vec3 node_line = cross(frame_i.z_axis, frame_j.z_axis);
  const double len = norm(node_line);
  if (len < kCollinearTolerance) {
    node_line = frame_i.x_axis;
    g.degenerate = true;
  } else {
    node_line = node_line / len;
  }
  g.alpha = signed_angle(frame_i.x_axis, node_line, frame_i.z_axis);
  g.beta = std::atan2(norm(cross(frame_i.z_axis, frame_j.z_axis)), dot(frame_i.z_axis, frame_j.z_axis));
  g.gamma = signed_angle(node_line, frame_j.x_axis, frame_j.z_axis);
  return g;
}

double dihedral(const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& p4) {
  const Vec3 b1 = p2 - p1;
  const Vec3 b2 = p3 - p2;
  const Vec3 b3 = p4 - p3;
  if (nearly_parallel(b1, b2) || nearly_parallel(b2, b3)) {
    throw Error(ErrorCode::DegenerateDihedral, "collinear points");
  }
  const Vec3 n1 = cross(b1, b2);
  const Vec3 n2 = cross(b2, b3);
  return std::atan2(norm(b2) * dot(b1, n2), dot(n1, n2));
}

SideChainGeom side_chain_torsions(const Residue& residue) {
  SideChainGeom out;
  const auto& table = chi_table();
  const auto it = table.find(residue.name);
  if (it == table.end()) return out;
  for (std::size_t k = 0; k < it->second.size(); ++k) {
    const auto& quad = it->second[k];
    std::array<const Atom*, 4> atoms{};
    for (std::size_t a = 0; a < 4; ++a) atoms[a] = residue.find_atom(quad[a]);
    if (std::any_of(atoms.begin(), atoms.end(), [](const Atom* p) { return p == nullptr; })) continue;
    try {
      out.chi[k] = dihedral(atoms[0]->position, atoms[1]->position, atoms[2]->position,
                            atoms[3]->position);
      out.mask[k] = true;
    } catch (const Error&) {
      // collinear side chain: leave the slot masked
    }
  }
  return out;
}

std::vector<std::string> torsion_path_atoms(std::string_view residue_name) {
  const auto& table = chi_table();
  const auto it = table.find(std::string(residue_name));
  if (it == table.end()) return {};
  std::vector<std::string> names{"CB"};
  for (const AtomQuad& quad : it->second) names.emplace_back(quad[3]);
  return names;
}

std::array<double, 8> torus_embed(const SideChainGeom& geom) {
  std::array<double, 8> out{};
  for (std::size_t k = 0; k < 4; ++k) {
    if (!geom.mask[k]) continue;
    out[2 * k] = std::sin(geom.chi[k]);
    out[2 * k + 1] = std::cos(geom.chi[k]);
  }
  return out;
}

}  // namespace mulaaip::geometry
