#include "mulaaip/structure.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <tuple>

#include "mulaaip/error.hpp"

namespace mulaaip {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// 1-based inclusive column range, clipped to the line.
std::string_view columns(std::string_view line, std::size_t first, std::size_t last) {
  if (line.size() < first) return {};
  return line.substr(first - 1, std::min(last, line.size()) - first + 1);
}

double parse_coordinate(std::string_view field, std::size_t line_no) {
  field = trim(field);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() ||
      !std::isfinite(value)) {
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(line_no) + ": bad coordinate '" + std::string(field) + "'");
  }
  return value;
}

struct PendingResidue {
  std::string name;
  std::vector<Atom> atoms;
};

constexpr std::array<std::string_view, 20> kThreeLetter = {
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
    "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL"};
constexpr std::string_view kOneLetter = "ARNDCQEGHILKMFPSTWYV";

}  // namespace

const Atom* Residue::find_atom(std::string_view atom_name) const {
  for (const auto& atom : atoms) {
    if (atom.name == atom_name) return &atom;
  }
  return nullptr;
}

std::size_t ProteinStructure::residue_count() const {
  std::size_t n = 0;
  for (const auto& chain : chains) n += chain.residues.size();
  return n;
}

std::vector<const Residue*> ProteinStructure::residues() const {
  std::vector<const Residue*> out;
  out.reserve(residue_count());
  for (const auto& chain : chains) {
    for (const auto& residue : chain.residues) out.push_back(&residue);
  }
  return out;
}

PdbParseResult parse_pdb(std::string_view text, const std::string& id) {
  using Key = std::tuple<std::string, std::string, char>;  // chain, resSeq, iCode

  std::vector<std::string> chain_order;
  std::map<std::string, std::vector<Key>> residue_order;
  std::map<Key, PendingResidue> pending;
  std::size_t atom_records = 0;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.starts_with("ENDMDL")) break;
    if (!line.starts_with("ATOM  ")) continue;

    if (line.size() < 54) {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(line_no) + ": ATOM record shorter than 54 columns");
    }
    const char altloc = line[16];
    if (altloc != ' ' && altloc != 'A') continue;
    const std::string res_name(trim(columns(line, 18, 20)));
    if (res_name == "HOH" || res_name == "WAT") continue;

    Atom atom;
    atom.name = std::string(trim(columns(line, 13, 16)));
    if (atom.name.empty()) {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(line_no) + ": empty atom name");
    }
    atom.position = {parse_coordinate(columns(line, 31, 38), line_no),
                     parse_coordinate(columns(line, 39, 46), line_no),
                     parse_coordinate(columns(line, 47, 54), line_no)};
    atom.element = std::string(trim(columns(line, 77, 78)));
    ++atom_records;

    const std::string chain_id(1, line[21]);
    Key key{chain_id, std::string(trim(columns(line, 23, 26))), line[26]};
    auto [it, inserted] = pending.try_emplace(key);
    if (inserted) {
      it->second.name = res_name;
      if (!residue_order.contains(chain_id)) chain_order.push_back(chain_id);
      residue_order[chain_id].push_back(key);
    }
    // A repeated atom name inside one residue keeps the first occurrence.
    if (std::none_of(it->second.atoms.begin(), it->second.atoms.end(),
                     [&](const Atom& a) { return a.name == atom.name; })) {
      it->second.atoms.push_back(std::move(atom));
    }
  }

  if (atom_records == 0) throw Error(ErrorCode::NoAtoms, "no ATOM records in '" + id + "'");

  PdbParseResult result;
  result.structure.id = id;
  std::size_t ordinal = 0;
  for (const auto& chain_id : chain_order) {
    Chain chain{chain_id, {}};
    for (const auto& key : residue_order[chain_id]) {
      auto& p = pending[key];
      Residue residue;
      residue.name = p.name;
      residue.atoms = std::move(p.atoms);
      if (const Atom* ca = residue.find_atom("CA")) {
        residue.anchor = ca->position;
      } else if (const Atom* n = residue.find_atom("N")) {
        residue.anchor = n->position;
      } else {
        ++result.dropped_residues;
        result.warnings.push_back(std::string(to_string(ErrorCode::MissingAnchor)) + ": chain " +
                                  chain_id + " residue " + std::get<1>(key) + " has neither CA nor N");
        continue;
      }
      residue.index = ordinal++;
      chain.residues.push_back(std::move(residue));
    }
    if (!chain.residues.empty()) result.structure.chains.push_back(std::move(chain));
  }
  if (result.structure.chains.empty()) {
    throw Error(ErrorCode::NoAtoms, "no residue with an anchor atom in '" + id + "'");
  }
  return result;
}

ProteinStructure select_chains(const ProteinStructure& structure,
                               const std::vector<std::string>& chain_ids) {
  ProteinStructure out;
  out.id = structure.id;
  for (const auto& wanted : chain_ids) {
    for (const auto& chain : structure.chains) {
      if (chain.id == wanted) out.chains.push_back(chain);
    }
  }
  if (out.chains.empty()) {
    throw Error(ErrorCode::EmptyGraph, "none of the requested chains exist in '" + structure.id + "'");
  }
  std::size_t ordinal = 0;
  for (auto& chain : out.chains) {
    for (auto& residue : chain.residues) residue.index = ordinal++;
  }
  return out;
}

std::string format_pdb(const ProteinStructure& structure) {
  std::string out;
  char buf[96];
  int serial = 1;
  for (const auto& chain : structure.chains) {
    int res_seq = 1;
    for (const auto& residue : chain.residues) {
      for (const auto& atom : residue.atoms) {
        // 4-character names start in column 13, shorter ones in column 14.
        const std::string name = atom.name.size() >= 4 ? atom.name : " " + atom.name;
        std::snprintf(buf, sizeof buf, "ATOM  %5d %-4.4s %3.3s %c%4d    %8.3f%8.3f%8.3f  1.00  0.00          %2.2s\n",
                      serial++ % 100000, name.c_str(), residue.name.c_str(),
                      chain.id.empty() ? ' ' : chain.id[0], res_seq % 10000, atom.position.x,
                      atom.position.y, atom.position.z, atom.element.c_str());
        out += buf;
      }
      ++res_seq;
    }
  }
  out += "END\n";
  return out;
}

std::vector<FastaRecord> parse_fasta(std::string_view text) {
  std::vector<FastaRecord> records;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty()) continue;
    if (line.front() == '>') {
      if (!records.empty() && records.back().sequence.empty()) {
        throw Error(ErrorCode::EmptyRecord, "record '" + records.back().id + "' has no sequence");
      }
      records.push_back({std::string(trim(line.substr(1))), {}});
      continue;
    }
    if (records.empty()) {
      throw Error(ErrorCode::EmptyRecord, "sequence data before the first '>' header");
    }
    for (char c : line) {
      if (!std::isspace(static_cast<unsigned char>(c))) {
        records.back().sequence.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      }
    }
  }
  if (records.empty()) throw Error(ErrorCode::EmptyRecord, "no FASTA header found");
  if (records.back().sequence.empty()) {
    throw Error(ErrorCode::EmptyRecord, "record '" + records.back().id + "' has no sequence");
  }
  return records;
}

int amino_acid_class(std::string_view three_letter) {
  const auto it = std::find(kThreeLetter.begin(), kThreeLetter.end(), three_letter);
  return it == kThreeLetter.end() ? kUnknownAminoAcid
                                  : static_cast<int>(std::distance(kThreeLetter.begin(), it));
}

int amino_acid_class_from_letter(char one_letter) {
  const auto p = kOneLetter.find(static_cast<char>(std::toupper(static_cast<unsigned char>(one_letter))));
  return p == std::string_view::npos ? kUnknownAminoAcid : static_cast<int>(p);
}

}  // namespace mulaaip
