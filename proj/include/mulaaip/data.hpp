#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mulaaip/graphs.hpp"
#include "mulaaip/model.hpp"

namespace mulaaip::data {

enum class LabelKind { DeltaG, DeltaGFromDdg, Alphaseq, Neutralization };

std::string to_string(LabelKind kind);
/// "dG", "dG_from_ddG", "alphaseq" or "neutralization"; throws Error{BadManifest}.
LabelKind parse_label_kind(std::string_view text);

inline constexpr double kGasConstantKcal = 1.9872e-3;  // kcal / (mol K)
inline constexpr double kDefaultTemperatureK = 298.0;

struct PairRecord {
  std::string pair_id;
  std::string ab_heavy_seq;
  std::string ab_light_seq;  // may be empty
  std::string ag_seq;
  std::optional<std::string> ab_structure_path;
  std::optional<std::string> ag_structure_path;
  std::vector<std::string> ab_chains;
  std::vector<std::string> ag_chains;
  double label = 0.0;
  LabelKind label_kind = LabelKind::DeltaG;
  double temperature_k = kDefaultTemperatureK;

  bool operator==(const PairRecord&) const = default;
};

/// Header row naming every manifest column, in canonical order.
inline constexpr std::string_view kManifestColumns[] = {
    "pair_id", "ab_heavy_seq", "ab_light_seq", "ag_seq",    "ab_structure_path", "ag_structure_path",
    "ab_chains", "ag_chains",  "label",        "label_kind", "temperature_k"};

/// CSV with a header row (columns in any order, all required). Fields may be
/// double-quoted; chain lists are ';'-separated. Throws Error{BadManifest}
/// with the line number.
std::vector<PairRecord> parse_manifest(std::string_view text);
std::string format_manifest(std::span<const PairRecord> records);

/// Splits one CSV line, honouring double quotes ("" is a literal quote).
std::vector<std::string> split_csv_line(std::string_view line);
/// Quotes a field when it holds a comma, quote or newline.
std::string csv_field(std::string_view text);

// ---- thermodynamics --------------------------------------------------------

/// R T ln(kd). Throws Error{NonPositiveKd} for kd <= 0 and Error{ConfigError}
/// for a non-positive temperature.
double dg_from_kd(double kd_molar, double temperature_k = kDefaultTemperatureK);
/// dG_mut = ddG + dG_wt.
double dg_from_ddg(double ddg, double dg_wild);
/// ddG = dG_mut - dG_wt.
double ddg_from_dg(double dg_mut, double dg_wild);

// ---- splits ----------------------------------------------------------------

struct Fold {
  std::vector<std::size_t> train;  // indices into the record list, ascending
  std::vector<std::size_t> test;
};

/// Seeded shuffle of 0..n-1, cut into k contiguous parts whose sizes differ
/// by at most one (larger parts first). Throws Error{TooFewRecords} when
/// n < k and Error{ConfigError} when k < 2.
std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

/// Same, but whole groups move together: groups are shuffled and dealt to
/// the currently smallest fold. Throws Error{TooFewRecords} when there are
/// fewer distinct groups than folds.
std::vector<Fold> kfold_split_grouped(std::span<const std::string> groups, std::size_t k, std::uint64_t seed);

/// Holds out max(1, round(fraction * |indices|)) entries for validation.
/// Throws Error{EmptySplit} if fewer than two indices are given.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(
    std::span<const std::size_t> indices, double fraction, std::uint64_t seed);

// ---- metrics ---------------------------------------------------------------

struct RegressionMetrics {
  double mae = 0.0;
  double pcc = 0.0;
  bool pcc_degenerate = false;  // zero variance: pcc reported as 0
};

struct ClassificationMetrics {
  double acc = 0.0;
  double f1 = 0.0;
  double roc_auc = 0.5;
  double g_mean = 0.0;
  double mcc = 0.0;
  bool auc_degenerate = false;  // single-class labels: auc reported as 0.5
  bool mcc_degenerate = false;  // zero denominator: mcc reported as 0
};

/// Throws Error{LengthMismatch} for unequal or empty inputs.
RegressionMetrics regression_metrics(std::span<const double> preds, std::span<const double> labels);
/// A probability at or above `threshold` predicts the positive class.
/// ROC-AUC is the Mann-Whitney statistic with tied scores averaged.
ClassificationMetrics classification_metrics(std::span<const double> probs, std::span<const double> labels,
                                             double threshold = 0.5);

struct MetricReport {
  std::string fold_id;
  std::optional<RegressionMetrics> regression;
  std::optional<ClassificationMetrics> classification;
};

MetricReport evaluate_predictions(std::string fold_id, model::Task task, std::span<const double> preds,
                                  std::span<const double> labels);

/// One row per report plus a "mean+-std" row (sample standard deviation).
/// Numbers use the shortest round-trip representation.
std::string format_metrics_csv(std::span<const MetricReport> reports, model::Task task);

/// Shortest decimal string that reads back as the same double.
std::string format_double(double v);

// ---- dataset assembly ------------------------------------------------------

/// Resolves a (structure path, chain list) to a featurised graph, or null.
using StructureLookup = std::function<std::shared_ptr<const graphs::StructuralGraph>(
    const std::string& path, const std::vector<std::string>& chains)>;

/// Entity identity used for deduplication.
std::string antibody_key(const PairRecord& r);
std::string antigen_key(const PairRecord& r);

/// Deduplicates entities, pools their sequence embeddings (looked up by
/// upper-case sequence) and checks that every label suits the task.
/// Missing embeddings or structures stay empty; the model decides whether
/// that is acceptable. With `check_labels`, throws Error{BadManifest} for
/// labels of the wrong kind.
model::Dataset assemble_dataset(std::span<const PairRecord> records, const graphs::EmbeddingStore& embeddings,
                                const StructureLookup& structures, model::Task task, bool check_labels = true);

}  // namespace mulaaip::data
