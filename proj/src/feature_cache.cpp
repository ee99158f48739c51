#include "mulaaip/feature_cache.hpp"

#include <openssl/evp.h>

#include <cstdint>

#include "mulaaip/binary_io.hpp"
#include "mulaaip/error.hpp"
#include "mulaaip/structure.hpp"

namespace mulaaip {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

FeatureCache::FeatureCache(std::filesystem::path dir, basis::BasisConfig cfg)
    : dir_(std::move(dir)), cfg_(cfg) {
  cfg_.validate();
  std::filesystem::create_directories(dir_);
}

std::string FeatureCache::key_for(std::string_view structure_bytes, const std::vector<std::string>& chains) const {
  ByteWriter w;
  w.str("structure");
  w.str(structure_bytes);
  w.f64(cfg_.cutoff);
  w.u32(static_cast<std::uint32_t>(cfg_.num_radial));
  w.u32(static_cast<std::uint32_t>(cfg_.num_spherical));
  w.u32(static_cast<std::uint32_t>(cfg_.envelope_exponent));
  w.u8(cfg_.envelope_enabled ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(chains.size()));
  for (const auto& c : chains) w.str(c);
  return sha256_hex(w.data());
}

FeatureCache::Entry FeatureCache::get(const std::filesystem::path& structure_path,
                                      const std::vector<std::string>& chains) const {
  const std::string bytes = read_file(structure_path.string());
  Entry e;
  e.key = key_for(bytes, chains);
  const auto path = path_for(e.key);
  if (std::filesystem::exists(path)) {
    e.graph = std::make_shared<const graphs::StructuralGraph>(graphs::deserialize_graph(read_file(path.string())));
    e.hit = true;
    return e;
  }
  ProteinStructure s = parse_pdb(bytes, structure_path.filename().string()).structure;
  if (!chains.empty()) s = select_chains(s, chains);
  auto graph = std::make_shared<graphs::StructuralGraph>(graphs::build_structural_graph(s, cfg_));
  // Write then rename so concurrent readers never see a partial file.
  const auto tmp = path.string() + ".tmp" + std::to_string(reinterpret_cast<std::uintptr_t>(graph.get()));
  write_file(tmp, graphs::serialize_graph(*graph));
  std::filesystem::rename(tmp, path);
  e.graph = std::move(graph);
  return e;
}

}  // namespace mulaaip
