#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mulaaip/autodiff.hpp"
#include "mulaaip/basis.hpp"
#include "mulaaip/graphs.hpp"
#include "mulaaip/layers.hpp"

namespace mulaaip::model {

using nn::Var;

enum class Task { Affinity, Neutralization };

std::string to_string(Task task);
/// "affinity" or "neutralization"; throws Error{ConfigError}.
Task parse_task(const std::string& name);

struct ModelConfig {
  Task task = Task::Affinity;
  std::size_t plm_dim = 0;  // width of the pooled sequence embeddings
  basis::BasisConfig basis;
  std::size_t embed_dim = 64;  // amino-acid embedding width
  std::size_t hidden = 128;
  std::size_t gat_layers = 2;
  std::size_t gcn_layers = 2;
  std::size_t knn_k = 32;
  double norm_scale = 1.0;
  double dropout = 0.1;
  double leaky_slope = 0.2;
  bool use_structure = true;
  bool use_sequence = true;
  bool use_smlp = true;
  bool sequence_only = false;  // tolerate entities without a structure

  /// Throws Error{ConfigError} naming the offending field.
  void validate() const;
};

struct AntibodyEntity {
  std::string key;
  std::shared_ptr<const graphs::StructuralGraph> structure;  // null when absent
  std::vector<double> heavy;  // pooled embedding
  std::vector<double> light;  // empty for single-chain antibodies, read as zeros
};

struct AntigenEntity {
  std::string key;
  std::shared_ptr<const graphs::StructuralGraph> structure;
  std::vector<double> embedding;
};

struct PairExample {
  std::string id;
  std::size_t antibody = 0;  // index into Dataset::antibodies
  std::size_t antigen = 0;
  double label = 0.0;
};

/// Entity tables plus pairs. Every entity takes part in the relation
/// graphs, whichever split its pairs belong to.
struct Dataset {
  std::vector<AntibodyEntity> antibodies;
  std::vector<AntigenEntity> antigens;
  std::vector<PairExample> pairs;
};

/// Sparsity patterns (and the weights they were built with) of the two
/// relation graphs.
struct Relations {
  graphs::RelationGraph antibody;
  graphs::RelationGraph antigen;
};

struct ForwardResult {
  Var output;  // B x 1: scaled affinity or neutralization logit
  std::optional<Var> antibody_weights;  // relation weights used, per pattern entry
  std::optional<Var> antigen_weights;
  std::size_t antibody_nodes = 0;
  std::size_t antigen_nodes = 0;
};

struct LossConfig {
  double lambda_w = 5e-4;   // squared weights
  double lambda_ab = 5e-4;  // antibody adjacency
  double lambda_ag = 5e-4;  // antigen adjacency

  void validate() const;
};

/// Inputs to the three penalty terms.
struct Penalties {
  std::optional<Var> antibody_weights;
  std::size_t antibody_nodes = 0;
  std::optional<Var> antigen_weights;
  std::size_t antigen_nodes = 0;
  std::vector<nn::Parameter*> weights;  // matrices under the squared penalty
};

/// lambda_ab |A_ab|_1 + lambda_ag |A_ag|_1 + lambda_w sum W^2, where |A|_1
/// counts the unit diagonal plus both directions of every kept entry.
Var penalty_term(nn::Tape& tape, const Penalties& penalties, const LossConfig& cfg);

/// sum (y - yhat)^2 + penalties. Throws Error{LengthMismatch}.
Var loss_affinity(nn::Tape& tape, Var preds, std::span<const double> labels,
                  const Penalties& penalties, const LossConfig& cfg);
/// -sum [y ln p + (1 - y) ln(1 - p)] with p clamped to [1e-7, 1 - 1e-7],
/// plus penalties. Throws Error{LengthMismatch}.
Var loss_neutralization(nn::Tape& tape, Var probs, std::span<const double> labels,
                        const Penalties& penalties, const LossConfig& cfg);

class MulaaipModel {
 public:
  MulaaipModel(ModelConfig cfg, std::uint64_t seed);
  MulaaipModel(const MulaaipModel&) = delete;
  MulaaipModel& operator=(const MulaaipModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  /// Throws Error{MissingModality} or Error{DimMismatch} if the dataset
  /// cannot feed this configuration.
  void check_dataset(const Dataset& data) const;

  /// Relation graphs over every entity, from the current sequence pipelines
  /// in evaluation mode. Empty graphs when the sequence branch is off.
  Relations build_relations(const Dataset& data);

  ForwardResult forward(nn::Tape& tape, const Dataset& data, const Relations& relations,
                        std::span<const std::size_t> pairs, Rng& rng, bool training);

  Penalties penalties(const ForwardResult& result);

  /// Task-space predictions: affinity in label units, or probability.
  std::vector<double> predict(const Dataset& data, const Relations& relations,
                              std::span<const std::size_t> pairs);

  /// Affinity labels are standardised with these before entering the loss.
  void set_label_scaling(double mean, double stddev);
  double label_mean() const;
  double label_std() const;

 private:
  struct SequencePipeline {
    layers::Linear fc1;
    layers::Linear fc2;
  };

  Var run_sequence(nn::Tape& tape, const SequencePipeline& pipe, Var pooled, Rng& rng, bool training) const;
  Var run_structure(nn::Tape& tape, const graphs::StructuralGraph& graph);
  Var run_smlp(nn::Tape& tape, Var z) const;
  Var antibody_sequence_input(nn::Tape& tape, const Dataset& data, bool light) const;
  Var antigen_sequence_input(nn::Tape& tape, const Dataset& data) const;

  ModelConfig cfg_;
  nn::ParameterStore store_;
  nn::Parameter* aa_embedding_ = nullptr;
  std::vector<layers::GatBlock> residue_stack_, backbone_stack_, side_stack_;
  SequencePipeline seq_antibody_, seq_antigen_;
  layers::NormAdaptiveGcn gcn_antibody_, gcn_antigen_;
  std::vector<layers::Linear> smlp_;
  std::vector<layers::Linear> head_;
  nn::Parameter* label_mean_ = nullptr;
  nn::Parameter* label_std_ = nullptr;
};

struct TrainConfig {
  double lr = 5e-5;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::size_t patience = 5;
  LossConfig loss;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean total loss per training pair
  double val_metric = 0.0;  // mean data loss on the validation pairs
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_metric = 0.0;
};

/// Mean per-pair data loss (no penalties) on `pairs`; affinity in
/// standardised units. This is the early-stopping criterion.
double validation_loss(MulaaipModel& model, const Dataset& data, const Relations& relations,
                       std::span<const std::size_t> pairs);

/// Mini-batch Adam with early stopping on validation loss; relation graphs
/// are rebuilt once per epoch. Leaves the model at its best epoch.
/// Throws Error{EmptySplit}.
TrainResult train(MulaaipModel& model, const Dataset& data, std::span<const std::size_t> train_pairs,
                  std::span<const std::size_t> val_pairs, const TrainConfig& cfg);

}  // namespace mulaaip::model
