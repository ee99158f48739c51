#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mulaaip/data.hpp"
#include "mulaaip/graphs.hpp"
#include "mulaaip/model.hpp"
#include "mulaaip/run_config.hpp"

namespace mulaaip::pipeline {

struct FeatureFailure {
  std::string pair_id;
  std::string side;  // "antibody" or "antigen"
  std::string message;
};

/// Graphs keyed by (resolved structure path, chain list).
using GraphKey = std::pair<std::string, std::vector<std::string>>;
using GraphMap = std::map<GraphKey, std::shared_ptr<const graphs::StructuralGraph>>;

struct FeaturizeReport {
  std::size_t antibody_graphs = 0;
  std::size_t antigen_graphs = 0;
  std::size_t cache_hits = 0;
  std::size_t computed = 0;
  std::size_t attempted = 0;  // distinct structures
  std::vector<FeatureFailure> failures;
  GraphMap graphs;
};

/// Loads or builds the graph of every distinct structure in `records`
/// (paths relative to `base_dir`) on `cfg.jobs` threads. Failures are
/// collected, not thrown.
FeaturizeReport featurize(const RunConfig& cfg, const std::vector<data::PairRecord>& records,
                          const std::string& base_dir);

std::string format_failures_csv(const std::vector<FeatureFailure>& failures);

/// Manifest, features and embeddings joined into a model dataset.
struct LoadedData {
  std::vector<data::PairRecord> records;
  FeaturizeReport features;
  graphs::EmbeddingStore embeddings;
  model::Dataset dataset;
  std::size_t plm_dim = 0;
};

LoadedData load(const RunConfig& cfg, bool check_labels = true);

struct FoldOutcome {
  std::size_t fold = 0;
  model::TrainResult training;
  data::MetricReport test_metrics;
  std::vector<std::size_t> train, val, test;
};

/// k-fold training. Writes per fold `fold_<k>/model.ckpt`, `history.csv`,
/// `split.json`, `predictions.csv`, and at the top level `metrics.csv` and
/// `config.json`. Folds run on `cfg.jobs` threads.
std::vector<FoldOutcome> train_cross_validation(const RunConfig& cfg, const LoadedData& data);

struct Evaluation {
  data::MetricReport metrics;
  double loss = 0.0;  // mean per-pair data loss, the early-stopping quantity
  std::vector<double> predictions;
  std::vector<std::size_t> pairs;
};

/// Loads `cfg.checkpoint` and scores the selected subset.
Evaluation evaluate(const RunConfig& cfg, const LoadedData& data);

/// Task-space predictions for every pair, in manifest order.
std::vector<double> predict(const RunConfig& cfg, const LoadedData& data);

std::string format_history_csv(const model::TrainResult& result);
std::string format_predictions_csv(const std::vector<data::PairRecord>& records,
                                   const std::vector<std::size_t>& pairs, const std::vector<double>& preds);

}  // namespace mulaaip::pipeline
