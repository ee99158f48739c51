#include "mulaaip/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

#include "mulaaip/binary_io.hpp"
#include "mulaaip/error.hpp"
#include "mulaaip/geometry.hpp"

namespace mulaaip::synthetic {
namespace {

constexpr const char* kResidueNames[20] = {"ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
                                           "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL"};
constexpr const char* kResidueLetters = "ARNDCQEGHILKMFPSTWYV";

Vec3 random_unit(Rng& rng) {
  for (;;) {
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    if (norm(v) > 1e-3) return normalized(v);
  }
}

// Places d so that |cd| = length, angle(b, c, d) = angle and
// dihedral(a, b, c, d) = torsion.
Vec3 place_atom(const Vec3& a, const Vec3& b, const Vec3& c, double length, double angle, double torsion) {
  const Vec3 bc = normalized(c - b);
  const Vec3 n = normalized(cross(b - a, bc));
  const Vec3 m = cross(n, bc);
  return c + bc * (-length * std::cos(angle)) + m * (length * std::sin(angle) * std::cos(torsion)) +
         n * (length * std::sin(angle) * std::sin(torsion));
}

std::string element_of(const std::string& atom_name) { return atom_name.substr(0, 1); }

}  // namespace

ProteinStructure random_protein(Rng& rng, std::size_t residues, const std::string& chain_id,
                                const std::string& id) {
  if (residues == 0) throw Error(ErrorCode::EmptyGraph, "random_protein needs at least one residue");
  std::vector<Vec3> trace{Vec3{0, 0, 0}};
  Vec3 dir = random_unit(rng);
  for (std::size_t i = 1; i < residues; ++i) {
    dir = normalized(dir + random_unit(rng) * 0.8);
    trace.push_back(trace.back() + dir * 3.8);
  }
  Chain chain{chain_id, {}};
  const double tetrahedral = 111.0 * std::numbers::pi / 180.0;
  for (std::size_t i = 0; i < residues; ++i) {
    const Vec3 ca = trace[i];
    const Vec3 forward = residues == 1 ? random_unit(rng)
                         : i + 1 < residues ? normalized(trace[i + 1] - ca)
                                            : normalized(ca - trace[i - 1]);
    Residue res;
    res.index = i;
    res.name = kResidueNames[rng.below(20)];
    const Vec3 n = ca + normalized(forward * -1.0 + random_unit(rng) * 0.7) * 1.46;
    const Vec3 c = ca + normalized(forward + random_unit(rng) * 0.7) * 1.52;
    res.atoms = {{"N", n, "N"}, {"CA", ca, "C"}, {"C", c, "C"}};
    Vec3 a = c, b = n, cur = ca;
    for (const std::string& name : geometry::torsion_path_atoms(res.name)) {
      const double torsion = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const Vec3 next = place_atom(a, b, cur, 1.53, tetrahedral, torsion);
      res.atoms.push_back({name, next, element_of(name)});
      a = b;
      b = cur;
      cur = next;
    }
    if (res.name == "ALA") {
      res.atoms.push_back({"CB", place_atom(c, n, ca, 1.53, tetrahedral, 2.1), "C"});
    }
    res.anchor = ca;
    chain.residues.push_back(std::move(res));
  }
  ProteinStructure s;
  s.id = id;
  s.chains.push_back(std::move(chain));
  return s;
}

std::string sequence_of(const ProteinStructure& structure) {
  std::string seq;
  for (const auto& chain : structure.chains) {
    for (const auto& r : chain.residues) {
      const int cls = amino_acid_class(r.name);
      seq += cls < 20 ? kResidueLetters[cls] : 'X';
    }
  }
  return seq;
}

namespace {

// Per-residue rows whose mean is close to latent * direction + offset.
graphs::EmbeddingMatrix latent_embedding(Rng& rng, std::size_t rows, const std::vector<double>& direction,
                                         const std::vector<double>& offset, double latent) {
  graphs::EmbeddingMatrix m;
  m.rows = static_cast<std::uint32_t>(rows);
  m.dim = static_cast<std::uint32_t>(direction.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < direction.size(); ++k) {
      m.values.push_back(static_cast<float>(latent * direction[k] + offset[k] + 0.05 * rng.normal()));
    }
  }
  return m;
}

std::vector<double> random_vector(Rng& rng, std::size_t dim, double scale) {
  std::vector<double> v(dim);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

}  // namespace

SyntheticSet generate(const Options& opt) {
  if (opt.pairs == 0 || opt.antigens == 0 || opt.plm_dim == 0 || opt.min_residues == 0 ||
      opt.max_residues < opt.min_residues) {
    throw Error(ErrorCode::ConfigError, "synthetic options out of range");
  }
  Rng rng(opt.seed);
  const auto residues = [&] { return opt.min_residues + rng.below(opt.max_residues - opt.min_residues + 1); };
  const auto heavy_dir = random_vector(rng, opt.plm_dim, 1.0);
  const auto light_dir = random_vector(rng, opt.plm_dim, 1.0);
  const auto antigen_dir = random_vector(rng, opt.plm_dim, 1.0);
  const auto heavy_off = random_vector(rng, opt.plm_dim, 0.5);
  const auto light_off = random_vector(rng, opt.plm_dim, 0.5);
  const auto antigen_off = random_vector(rng, opt.plm_dim, 0.5);

  SyntheticSet set;
  auto add_embedding = [&](const std::string& seq, graphs::EmbeddingMatrix m) {
    if (!set.embeddings.find(seq)) set.embeddings.add(seq, std::move(m));
  };

  struct Antigen {
    std::string seq, path;
    double latent;
  };
  std::vector<Antigen> antigens;
  for (std::size_t j = 0; j < opt.antigens; ++j) {
    const std::string id = "ag_" + std::to_string(j);
    ProteinStructure s = random_protein(rng, residues(), "A", id);
    const double latent = rng.uniform(-1.0, 1.0);
    const std::string seq = sequence_of(s);
    add_embedding(seq, latent_embedding(rng, s.residue_count(), antigen_dir, antigen_off, latent));
    const std::string path = "structures/" + id + ".pdb";
    set.files.emplace_back(path, format_pdb(s));
    antigens.push_back({seq, path, latent});
  }

  for (std::size_t i = 0; i < opt.pairs; ++i) {
    const std::string id = "ab_" + std::to_string(i);
    ProteinStructure heavy = random_protein(rng, residues(), "H", id);
    ProteinStructure light = random_protein(rng, residues(), "L", id);
    // Keep the two chains apart so the file reads as two separate domains.
    for (auto& r : light.chains[0].residues) {
      for (auto& a : r.atoms) a.position = a.position + Vec3{30.0, 0.0, 0.0};
      r.anchor = r.anchor + Vec3{30.0, 0.0, 0.0};
    }
    double latent = rng.uniform(-1.0, 1.0);
    if (opt.task == model::Task::Neutralization) latent = (latent < 0 ? -1.0 : 1.0) * (0.4 + 0.6 * std::abs(latent));
    const std::string hseq = sequence_of(heavy);
    const std::string lseq = sequence_of(light);
    add_embedding(hseq, latent_embedding(rng, heavy.residue_count(), heavy_dir, heavy_off, latent));
    add_embedding(lseq, latent_embedding(rng, light.residue_count(), light_dir, light_off, latent));

    ProteinStructure complex;
    complex.id = id;
    complex.chains = {heavy.chains[0], light.chains[0]};
    const std::string path = "structures/" + id + ".pdb";
    set.files.emplace_back(path, format_pdb(complex));

    const Antigen& ag = antigens[i % antigens.size()];
    data::PairRecord r;
    char pid[16];
    std::snprintf(pid, sizeof pid, "p%03zu", i);
    r.pair_id = pid;
    r.ab_heavy_seq = hseq;
    r.ab_light_seq = lseq;
    r.ag_seq = ag.seq;
    r.ab_structure_path = path;
    r.ag_structure_path = ag.path;
    r.ab_chains = {"H", "L"};
    r.ag_chains = {"A"};
    if (opt.task == model::Task::Affinity) {
      r.label = -10.0 + 1.5 * latent + 0.5 * ag.latent;
      r.label_kind = data::LabelKind::DeltaG;
    } else {
      r.label = latent + 0.3 * ag.latent > 0.0 ? 1.0 : 0.0;
      r.label_kind = data::LabelKind::Neutralization;
    }
    set.records.push_back(std::move(r));
  }
  return set;
}

void write(const SyntheticSet& set, const std::string& dir) {
  namespace fs = std::filesystem;
  for (const auto& [rel, text] : set.files) {
    const fs::path p = fs::path(dir) / rel;
    fs::create_directories(p.parent_path());
    write_file(p.string(), text);
  }
  fs::create_directories(dir);
  write_file((fs::path(dir) / "manifest.csv").string(), data::format_manifest(set.records));
  write_file((fs::path(dir) / "embeddings.plmb").string(), graphs::write_embeddings(set.embeddings));
}

}  // namespace mulaaip::synthetic
