#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mulaaip/vec3.hpp"

namespace mulaaip {

struct Atom {
  std::string name;
  Vec3 position;
  std::string element;
};

struct Residue {
  std::size_t index = 0;  // ordinal in file order across the whole structure
  std::string name;       // 3-letter code, kept verbatim for non-canonical residues
  std::vector<Atom> atoms;
  Vec3 anchor;  // CA when present, otherwise N

  const Atom* find_atom(std::string_view atom_name) const;
};

struct Chain {
  std::string id;
  std::vector<Residue> residues;
};

struct ProteinStructure {
  std::string id;
  std::vector<Chain> chains;

  std::size_t residue_count() const;
  /// Residues of all chains, in chain order.
  std::vector<const Residue*> residues() const;
};

struct PdbParseResult {
  ProteinStructure structure;
  /// Residues dropped because they had neither CA nor N.
  std::size_t dropped_residues = 0;
  std::vector<std::string> warnings;
};

/// Parses fixed-column PDB text. Only ATOM records of the first model are
/// read; waters, HETATM and alternate locations other than blank/'A' are
/// skipped. Throws Error{NoAtoms} or Error{MalformedRecord}.
PdbParseResult parse_pdb(std::string_view text, const std::string& id);

/// Keeps only the listed chains, in the listed order. Throws
/// Error{EmptyGraph} if none of them is present.
ProteinStructure select_chains(const ProteinStructure& structure,
                               const std::vector<std::string>& chain_ids);

/// Writes ATOM records in the same column layout parse_pdb reads.
std::string format_pdb(const ProteinStructure& structure);

struct FastaRecord {
  std::string id;
  std::string sequence;
  bool operator==(const FastaRecord&) const = default;
};

std::vector<FastaRecord> parse_fasta(std::string_view text);

// Amino-acid classes: 0..19 in alphabetical order of 3-letter codes, 20 = unknown.
inline constexpr int kNumAminoAcidClasses = 21;
inline constexpr int kUnknownAminoAcid = 20;

int amino_acid_class(std::string_view three_letter);
int amino_acid_class_from_letter(char one_letter);

}  // namespace mulaaip
