#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mulaaip/basis.hpp"
#include "mulaaip/graphs.hpp"

namespace mulaaip {

/// On-disk store of featurised structural graphs. Entries are named by the
/// SHA-256 of (structure bytes, basis configuration, chain selection), so a
/// change to any of them misses the cache.
class FeatureCache {
 public:
  FeatureCache(std::filesystem::path dir, basis::BasisConfig cfg);

  struct Entry {
    std::shared_ptr<const graphs::StructuralGraph> graph;
    std::string key;
    bool hit = false;
  };

  /// Reads the structure file, then loads or builds (and stores) its graph.
  /// Parse and geometry failures propagate as Error.
  Entry get(const std::filesystem::path& structure_path, const std::vector<std::string>& chains) const;

  std::string key_for(std::string_view structure_bytes, const std::vector<std::string>& chains) const;
  std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".msgf"); }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  basis::BasisConfig cfg_;
};

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);

}  // namespace mulaaip
