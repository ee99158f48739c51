#include "mulaaip/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>

#include "mulaaip/error.hpp"

namespace mulaaip {

namespace {

Error bad(const std::string& key, const std::string& what) {
  return Error(ErrorCode::ConfigError, "config key '" + key + "': " + what);
}

template <typename Fn>
void for_each_field(RunConfig& c, Fn&& fn) {
  fn("manifest", c.manifest);
  fn("embeddings", c.embeddings);
  fn("out", c.out);
  fn("cache_dir", c.cache_dir);
  fn("checkpoint", c.checkpoint);
  fn("split_file", c.split_file);
  fn("subset", c.subset);
  fn("seed", c.seed);
  fn("jobs", c.jobs);
  fn("lr", c.lr);
  fn("epochs", c.epochs);
  fn("batch_size", c.batch_size);
  fn("patience", c.patience);
  fn("folds", c.folds);
  fn("val_fraction", c.val_fraction);
  fn("group_by", c.group_by);
  fn("cutoff", c.cutoff);
  fn("num_radial", c.num_radial);
  fn("num_spherical", c.num_spherical);
  fn("envelope_exponent", c.envelope_exponent);
  fn("envelope", c.envelope);
  fn("knn_k", c.knn_k);
  fn("hidden", c.hidden);
  fn("embed_dim", c.embed_dim);
  fn("gat_layers", c.gat_layers);
  fn("gcn_layers", c.gcn_layers);
  fn("norm_scale", c.norm_scale);
  fn("dropout", c.dropout);
  fn("leaky_slope", c.leaky_slope);
  fn("lambda", c.lambda);
  fn("lambda_ab", c.lambda_ab);
  fn("lambda_ag", c.lambda_ag);
  fn("sequence_only", c.sequence_only);
  fn("ablate_structure", c.ablate_structure);
  fn("ablate_sequence", c.ablate_sequence);
  fn("ablate_smlp", c.ablate_smlp);
}

void read_value(const std::string& key, const nlohmann::json& v, std::string& out) {
  if (!v.is_string()) throw bad(key, "expected a string");
  out = v.get<std::string>();
}
void read_value(const std::string& key, const nlohmann::json& v, bool& out) {
  if (!v.is_boolean()) throw bad(key, "expected true or false");
  out = v.get<bool>();
}
void read_value(const std::string& key, const nlohmann::json& v, double& out) {
  if (!v.is_number()) throw bad(key, "expected a number");
  out = v.get<double>();
  if (!std::isfinite(out)) throw bad(key, "expected a finite number");
}
template <typename U>
  requires std::is_unsigned_v<U>
void read_value(const std::string& key, const nlohmann::json& v, U& out) {
  // Parsed text yields unsigned values; built documents may carry signed ones.
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw bad(key, "expected a non-negative integer");
  }
  out = v.get<U>();
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"task", ConfigKind::String, "affinity or neutralization"},
      {"manifest", ConfigKind::String, "pair manifest CSV"},
      {"embeddings", ConfigKind::String, "sequence embedding file"},
      {"out", ConfigKind::String, "output directory"},
      {"cache_dir", ConfigKind::String, "feature cache directory (default <out>/cache)"},
      {"checkpoint", ConfigKind::String, "model checkpoint to load"},
      {"split_file", ConfigKind::String, "split.json from a training fold"},
      {"subset", ConfigKind::String, "pairs to evaluate: all, train, val or test"},
      {"seed", ConfigKind::Unsigned, "random seed"},
      {"jobs", ConfigKind::Unsigned, "worker threads"},
      {"lr", ConfigKind::Real, "Adam learning rate"},
      {"epochs", ConfigKind::Unsigned, "maximum epochs"},
      {"batch_size", ConfigKind::Unsigned, "pairs per mini-batch"},
      {"patience", ConfigKind::Unsigned, "epochs without validation improvement before stopping"},
      {"folds", ConfigKind::Unsigned, "cross-validation folds"},
      {"val_fraction", ConfigKind::Real, "share of each training portion held out for early stopping"},
      {"group_by", ConfigKind::String, "keep folds grouped: none, antibody or antigen"},
      {"cutoff", ConfigKind::Real, "radius graph cutoff in angstrom"},
      {"num_radial", ConfigKind::Unsigned, "radial basis size N"},
      {"num_spherical", ConfigKind::Unsigned, "spherical basis size M"},
      {"envelope_exponent", ConfigKind::Unsigned, "envelope polynomial exponent p"},
      {"envelope", ConfigKind::Bool, "apply the smooth cutoff envelope"},
      {"knn_k", ConfigKind::Unsigned, "neighbours kept per relation-graph node"},
      {"hidden", ConfigKind::Unsigned, "hidden width"},
      {"embed_dim", ConfigKind::Unsigned, "amino-acid embedding width"},
      {"gat_layers", ConfigKind::Unsigned, "attention layers per structural level"},
      {"gcn_layers", ConfigKind::Unsigned, "relation GCN layers"},
      {"norm_scale", ConfigKind::Real, "center-and-scale target scale s"},
      {"dropout", ConfigKind::Real, "dropout rate"},
      {"leaky_slope", ConfigKind::Real, "LeakyReLU negative slope"},
      {"lambda", ConfigKind::Real, "squared-weight penalty"},
      {"lambda_ab", ConfigKind::Real, "antibody adjacency L1 penalty"},
      {"lambda_ag", ConfigKind::Real, "antigen adjacency L1 penalty"},
      {"sequence_only", ConfigKind::Bool, "allow entities without a structure"},
      {"ablate_structure", ConfigKind::Bool, "drop the structural branch"},
      {"ablate_sequence", ConfigKind::Bool, "drop the sequence branch"},
      {"ablate_smlp", ConfigKind::Bool, "replace the shared MLP by the identity"},
  };
  return keys;
}

RunConfig config_from_json(const nlohmann::json& doc, RunConfig base) {
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const auto& k : config_keys()) known = known || key == k.name;
    if (!known) throw bad(key, "unknown key");
    if (key == "task") {
      if (!value.is_string()) throw bad(key, "expected a string");
      base.task = model::parse_task(value.get<std::string>());
    }
  }
  for_each_field(base, [&](const char* name, auto& field) {
    if (doc.contains(name)) read_value(name, doc.at(name), field);
  });
  base.validate();
  return base;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json doc;
  doc["task"] = model::to_string(cfg.task);
  RunConfig copy = cfg;
  for_each_field(copy, [&](const char* name, auto& field) { doc[name] = field; });
  return doc;
}

nlohmann::json config_value_from_text(const ConfigKey& key, const std::string& text) {
  switch (key.kind) {
    case ConfigKind::String: return text;
    case ConfigKind::Bool:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw bad(key.name, "expected true or false, got '" + text + "'");
    case ConfigKind::Unsigned: {
      std::uint64_t v = 0;
      const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) {
        throw bad(key.name, "expected a non-negative integer, got '" + text + "'");
      }
      return v;
    }
    case ConfigKind::Real: {
      double v = 0;
      const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v)) {
        throw bad(key.name, "expected a number, got '" + text + "'");
      }
      return v;
    }
  }
  return nullptr;
}

basis::BasisConfig RunConfig::basis() const {
  basis::BasisConfig b;
  b.cutoff = cutoff;
  b.num_radial = static_cast<int>(num_radial);
  b.num_spherical = static_cast<int>(num_spherical);
  b.envelope_exponent = static_cast<int>(envelope_exponent);
  b.envelope_enabled = envelope;
  return b;
}

model::ModelConfig RunConfig::model_config(std::size_t plm_dim) const {
  model::ModelConfig m;
  m.task = task;
  m.plm_dim = plm_dim;
  m.basis = basis();
  m.embed_dim = embed_dim;
  m.hidden = hidden;
  m.gat_layers = gat_layers;
  m.gcn_layers = gcn_layers;
  m.knn_k = knn_k;
  m.norm_scale = norm_scale;
  m.dropout = dropout;
  m.leaky_slope = leaky_slope;
  m.use_structure = !ablate_structure;
  m.use_sequence = !ablate_sequence;
  m.use_smlp = !ablate_smlp;
  m.sequence_only = sequence_only;
  return m;
}

model::TrainConfig RunConfig::train_config(std::uint64_t train_seed) const {
  model::TrainConfig t;
  t.lr = lr;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.patience = patience;
  t.loss = {lambda, lambda_ab, lambda_ag};
  t.seed = train_seed;
  return t;
}

std::string RunConfig::resolved_cache_dir() const {
  return cache_dir.empty() ? (std::filesystem::path(out) / "cache").string() : cache_dir;
}

void RunConfig::validate() const {
  auto positive = [](const char* key, auto v) {
    if (!(v > 0)) throw bad(key, "must be positive");
  };
  positive("jobs", jobs);
  positive("lr", lr);
  positive("epochs", epochs);
  positive("batch_size", batch_size);
  positive("patience", patience);
  positive("cutoff", cutoff);
  positive("num_radial", num_radial);
  positive("num_spherical", num_spherical);
  positive("envelope_exponent", envelope_exponent);
  positive("knn_k", knn_k);
  positive("hidden", hidden);
  positive("embed_dim", embed_dim);
  positive("gat_layers", gat_layers);
  positive("gcn_layers", gcn_layers);
  positive("norm_scale", norm_scale);
  if (folds < 2) throw bad("folds", "must be at least 2");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw bad("val_fraction", "must lie in (0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw bad("dropout", "must lie in [0, 1)");
  if (leaky_slope < 0.0) throw bad("leaky_slope", "must be non-negative");
  if (lambda < 0.0) throw bad("lambda", "must be non-negative");
  if (lambda_ab < 0.0) throw bad("lambda_ab", "must be non-negative");
  if (lambda_ag < 0.0) throw bad("lambda_ag", "must be non-negative");
  if (group_by != "none" && group_by != "antibody" && group_by != "antigen") {
    throw bad("group_by", "expected none, antibody or antigen");
  }
  if (subset != "all" && subset != "train" && subset != "val" && subset != "test") {
    throw bad("subset", "expected all, train, val or test");
  }
  if (ablate_structure && ablate_sequence) throw bad("ablate_sequence", "cannot ablate both branches");
}

}  // namespace mulaaip
