#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mulaaip/basis.hpp"
#include "mulaaip/model.hpp"

namespace mulaaip {

/// Every setting a command can take. Each field is one config key of the
/// same name.
struct RunConfig {
  model::Task task = model::Task::Affinity;
  std::string manifest;
  std::string embeddings;
  std::string out = "mulaaip_out";
  std::string cache_dir;   // empty: <out>/cache
  std::string checkpoint;  // evaluate / predict
  std::string split_file;  // evaluate: split.json written by train
  std::string subset = "all";  // evaluate: all | train | val | test
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  double lr = 5e-5;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::size_t patience = 5;
  std::size_t folds = 10;
  double val_fraction = 0.1;
  std::string group_by = "none";  // none | antibody | antigen

  double cutoff = 10.0;
  std::size_t num_radial = 6;
  std::size_t num_spherical = 7;
  std::size_t envelope_exponent = 6;
  bool envelope = true;

  std::size_t knn_k = 32;
  std::size_t hidden = 128;
  std::size_t embed_dim = 64;
  std::size_t gat_layers = 2;
  std::size_t gcn_layers = 2;
  double norm_scale = 1.0;
  double dropout = 0.1;
  double leaky_slope = 0.2;
  double lambda = 5e-4;
  double lambda_ab = 5e-4;
  double lambda_ag = 5e-4;

  bool sequence_only = false;
  bool ablate_structure = false;
  bool ablate_sequence = false;
  bool ablate_smlp = false;

  basis::BasisConfig basis() const;
  model::ModelConfig model_config(std::size_t plm_dim) const;
  model::TrainConfig train_config(std::uint64_t train_seed) const;
  std::string resolved_cache_dir() const;

  /// Throws Error{ConfigError} naming the offending key.
  void validate() const;
};

enum class ConfigKind { String, Unsigned, Real, Bool };

struct ConfigKey {
  const char* name;
  ConfigKind kind;
  const char* help;
};

const std::vector<ConfigKey>& config_keys();

/// Strict: unknown keys and mistyped values throw Error{ConfigError} with
/// the key name. Missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& doc, RunConfig base = {});
nlohmann::json config_to_json(const RunConfig& cfg);

/// Parses a command-line string for `key` into a JSON value of its kind.
nlohmann::json config_value_from_text(const ConfigKey& key, const std::string& text);

}  // namespace mulaaip
