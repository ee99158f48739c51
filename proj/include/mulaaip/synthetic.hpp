#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mulaaip/data.hpp"
#include "mulaaip/graphs.hpp"
#include "mulaaip/model.hpp"
#include "mulaaip/rng.hpp"
#include "mulaaip/structure.hpp"

namespace mulaaip::synthetic {

/// Random backbone (persistent random walk of 3.8 A steps) with N, CA, C
/// and the side-chain atoms needed for every chi angle of each residue.
ProteinStructure random_protein(Rng& rng, std::size_t residues, const std::string& chain_id,
                                const std::string& id);

/// One-letter sequence of the residues in chain order.
std::string sequence_of(const ProteinStructure& structure);

struct Options {
  model::Task task = model::Task::Affinity;
  std::size_t pairs = 20;
  std::size_t antigens = 4;
  std::size_t min_residues = 8;
  std::size_t max_residues = 12;
  std::size_t plm_dim = 16;
  std::uint64_t seed = 0;
};

/// Pairs whose labels are a function of per-entity latents that the
/// sequence embeddings encode linearly. Each pair has its own antibody
/// (chains H and L in one file); antigens (chain A) are shared round-robin.
/// Neutralization latents keep a margin from the decision boundary.
struct SyntheticSet {
  std::vector<data::PairRecord> records;
  std::vector<std::pair<std::string, std::string>> files;  // relative path, PDB text
  graphs::EmbeddingStore embeddings;
};

SyntheticSet generate(const Options& options);

/// Writes the structure files, `manifest.csv` and `embeddings.plmb` below dir.
void write(const SyntheticSet& set, const std::string& dir);

}  // namespace mulaaip::synthetic
