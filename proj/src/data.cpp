#include "mulaaip/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "mulaaip/error.hpp"
#include "mulaaip/rng.hpp"

namespace mulaaip::data {

std::string to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::DeltaG: return "dG";
    case LabelKind::DeltaGFromDdg: return "dG_from_ddG";
    case LabelKind::Alphaseq: return "alphaseq";
    case LabelKind::Neutralization: return "neutralization";
  }
  return "?";
}

LabelKind parse_label_kind(std::string_view text) {
  for (LabelKind k : {LabelKind::DeltaG, LabelKind::DeltaGFromDdg, LabelKind::Alphaseq, LabelKind::Neutralization}) {
    if (text == to_string(k)) return k;
  }
  throw Error(ErrorCode::BadManifest, "unknown label_kind '" + std::string(text) + "'");
}

// ---- csv -------------------------------------------------------------------

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw Error(ErrorCode::BadManifest, "unterminated quoted field");
  return fields;
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

namespace {

std::string normalize_sequence(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string> split_chains(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = std::min(s.find(';', start), s.size());
    std::string_view part = s.substr(start, end - start);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    if (!part.empty()) out.emplace_back(part);
    start = end + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::vector<PairRecord> parse_manifest(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < text.size();) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  auto fail = [](std::size_t line_no, const std::string& what) -> Error {
    return Error(ErrorCode::BadManifest, "line " + std::to_string(line_no) + ": " + what);
  };
  std::size_t first = 0;
  while (first < lines.size() && lines[first].empty()) ++first;
  if (first == lines.size()) throw Error(ErrorCode::BadManifest, "missing header row");

  std::map<std::string, std::size_t> column;
  {
    const auto header = split_csv_line(lines[first]);
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string name = header[i];
      if (std::find(std::begin(kManifestColumns), std::end(kManifestColumns), name) == std::end(kManifestColumns)) {
        throw fail(first + 1, "unknown column '" + name + "'");
      }
      if (!column.emplace(name, i).second) throw fail(first + 1, "duplicate column '" + name + "'");
    }
    for (std::string_view name : kManifestColumns) {
      if (!column.contains(std::string(name))) throw fail(first + 1, "missing column '" + std::string(name) + "'");
    }
  }

  std::vector<PairRecord> records;
  std::unordered_set<std::string> seen;
  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    std::vector<std::string> f;
    try {
      f = split_csv_line(lines[li]);
    } catch (const Error& e) {
      throw fail(li + 1, e.what());
    }
    if (f.size() != column.size()) {
      throw fail(li + 1, "expected " + std::to_string(column.size()) + " fields, found " + std::to_string(f.size()));
    }
    auto get = [&](const char* name) -> const std::string& { return f[column.at(name)]; };
    PairRecord r;
    r.pair_id = get("pair_id");
    if (r.pair_id.empty()) throw fail(li + 1, "empty pair_id");
    if (!seen.insert(r.pair_id).second) throw fail(li + 1, "duplicate pair_id '" + r.pair_id + "'");
    r.ab_heavy_seq = normalize_sequence(get("ab_heavy_seq"));
    r.ab_light_seq = normalize_sequence(get("ab_light_seq"));
    r.ag_seq = normalize_sequence(get("ag_seq"));
    if (r.ab_heavy_seq.empty()) throw fail(li + 1, "empty ab_heavy_seq");
    if (r.ag_seq.empty()) throw fail(li + 1, "empty ag_seq");
    if (!get("ab_structure_path").empty()) r.ab_structure_path = get("ab_structure_path");
    if (!get("ag_structure_path").empty()) r.ag_structure_path = get("ag_structure_path");
    r.ab_chains = split_chains(get("ab_chains"));
    r.ag_chains = split_chains(get("ag_chains"));
    const auto label = parse_double(get("label"));
    if (!label) throw fail(li + 1, "label '" + get("label") + "' is not a finite number");
    r.label = *label;
    try {
      r.label_kind = parse_label_kind(get("label_kind"));
    } catch (const Error& e) {
      throw fail(li + 1, e.what());
    }
    if (r.label_kind == LabelKind::Neutralization && r.label != 0.0 && r.label != 1.0) {
      throw fail(li + 1, "neutralization label must be 0 or 1");
    }
    if (!get("temperature_k").empty()) {
      const auto t = parse_double(get("temperature_k"));
      if (!t || *t <= 0.0) throw fail(li + 1, "temperature_k must be a positive number");
      r.temperature_k = *t;
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string format_manifest(std::span<const PairRecord> records) {
  std::string out;
  for (std::size_t i = 0; i < std::size(kManifestColumns); ++i) {
    if (i) out += ',';
    out += kManifestColumns[i];
  }
  out += '\n';
  for (const auto& r : records) {
    const std::string fields[] = {r.pair_id,
                                  r.ab_heavy_seq,
                                  r.ab_light_seq,
                                  r.ag_seq,
                                  r.ab_structure_path.value_or(""),
                                  r.ag_structure_path.value_or(""),
                                  join(r.ab_chains, ';'),
                                  join(r.ag_chains, ';'),
                                  format_double(r.label),
                                  to_string(r.label_kind),
                                  format_double(r.temperature_k)};
    for (std::size_t i = 0; i < std::size(fields); ++i) {
      if (i) out += ',';
      out += csv_field(fields[i]);
    }
    out += '\n';
  }
  return out;
}

// ---- thermodynamics --------------------------------------------------------

double dg_from_kd(double kd_molar, double temperature_k) {
  if (!(kd_molar > 0.0)) throw Error(ErrorCode::NonPositiveKd, "kd must be positive, got " + format_double(kd_molar));
  if (!(temperature_k > 0.0)) throw Error(ErrorCode::ConfigError, "temperature must be positive");
  return kGasConstantKcal * temperature_k * std::log(kd_molar);
}

double dg_from_ddg(double ddg, double dg_wild) { return ddg + dg_wild; }
double ddg_from_dg(double dg_mut, double dg_wild) { return dg_mut - dg_wild; }

// ---- splits ----------------------------------------------------------------

namespace {

std::vector<Fold> folds_from_assignment(const std::vector<std::size_t>& fold_of, std::size_t k) {
  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) (f == fold_of[i] ? folds[f].test : folds[f].train).push_back(i);
  }
  return folds;
}

}  // namespace

std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::ConfigError, "folds: need at least 2, got " + std::to_string(k));
  if (n < k) {
    throw Error(ErrorCode::TooFewRecords,
                std::to_string(n) + " records cannot fill " + std::to_string(k) + " folds");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm.begin(), perm.end());
  std::vector<std::size_t> fold_of(n);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fold_of[perm[pos++]] = f;
  }
  return folds_from_assignment(fold_of, k);
}

std::vector<Fold> kfold_split_grouped(std::span<const std::string> groups, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::ConfigError, "folds: need at least 2, got " + std::to_string(k));
  std::vector<std::string> unique;
  std::unordered_map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto [it, inserted] = members.try_emplace(groups[i]);
    if (inserted) unique.push_back(groups[i]);
    it->second.push_back(i);
  }
  if (unique.size() < k) {
    throw Error(ErrorCode::TooFewRecords,
                std::to_string(unique.size()) + " groups cannot fill " + std::to_string(k) + " folds");
  }
  Rng rng(seed);
  rng.shuffle(unique.begin(), unique.end());
  std::vector<std::size_t> fold_of(groups.size());
  std::vector<std::size_t> load(k, 0);
  for (const auto& g : unique) {
    const auto f = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    for (std::size_t i : members[g]) fold_of[i] = f;
    load[f] += members[g].size();
  }
  return folds_from_assignment(fold_of, k);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(std::span<const std::size_t> indices,
                                                                            double fraction, std::uint64_t seed) {
  if (indices.size() < 2) throw Error(ErrorCode::EmptySplit, "need at least two pairs to hold out validation");
  std::vector<std::size_t> perm(indices.begin(), indices.end());
  Rng rng(seed);
  rng.shuffle(perm.begin(), perm.end());
  const auto wanted = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(perm.size())));
  const std::size_t n_val = std::clamp<std::size_t>(wanted, 1, perm.size() - 1);
  std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(val)};
}

// ---- metrics ---------------------------------------------------------------

namespace {

void check_inputs(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(a.size()) + " predictions vs " + std::to_string(b.size()) + " labels");
  }
}

}  // namespace

RegressionMetrics regression_metrics(std::span<const double> preds, std::span<const double> labels) {
  check_inputs(preds, labels);
  const auto n = static_cast<double>(preds.size());
  RegressionMetrics m;
  double mp = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    m.mae += std::abs(labels[i] - preds[i]);
    mp += preds[i];
    ml += labels[i];
  }
  m.mae /= n;
  mp /= n;
  ml /= n;
  double cov = 0.0, vp = 0.0, vl = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    cov += (preds[i] - mp) * (labels[i] - ml);
    vp += (preds[i] - mp) * (preds[i] - mp);
    vl += (labels[i] - ml) * (labels[i] - ml);
  }
  if (vp == 0.0 || vl == 0.0) {
    m.pcc_degenerate = true;
  } else {
    m.pcc = std::clamp(cov / std::sqrt(vp * vl), -1.0, 1.0);
  }
  return m;
}

ClassificationMetrics classification_metrics(std::span<const double> probs, std::span<const double> labels,
                                             double threshold) {
  check_inputs(probs, labels);
  double tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool predicted = probs[i] >= threshold;
    const bool actual = labels[i] >= 0.5;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  ClassificationMetrics m;
  m.acc = (tp + tn) / static_cast<double>(probs.size());
  m.f1 = (2 * tp + fp + fn) > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
  const double sensitivity = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  const double specificity = tn + fp > 0 ? tn / (tn + fp) : 0.0;
  m.g_mean = std::sqrt(sensitivity * specificity);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) {
    m.mcc_degenerate = true;
  } else {
    m.mcc = std::clamp((tp * tn - fp * fn) / std::sqrt(denom), -1.0, 1.0);
  }

  const double n_pos = tp + fn;
  const double n_neg = tn + fp;
  if (n_pos == 0 || n_neg == 0) {
    m.auc_degenerate = true;
    m.roc_auc = 0.5;
    return m;
  }
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && probs[order[j]] == probs[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] >= 0.5) pos_rank_sum += avg_rank;
    }
    i = j;
  }
  m.roc_auc = (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
  return m;
}

MetricReport evaluate_predictions(std::string fold_id, model::Task task, std::span<const double> preds,
                                  std::span<const double> labels) {
  MetricReport r;
  r.fold_id = std::move(fold_id);
  if (task == model::Task::Affinity) {
    r.regression = regression_metrics(preds, labels);
  } else {
    r.classification = classification_metrics(preds, labels);
  }
  return r;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string format_metrics_csv(std::span<const MetricReport> reports, model::Task task) {
  const bool regression = task == model::Task::Affinity;
  std::vector<std::string> names = regression ? std::vector<std::string>{"mae", "pcc"}
                                              : std::vector<std::string>{"acc", "f1", "roc_auc", "g_mean", "mcc"};
  auto values = [&](const MetricReport& r) -> std::vector<double> {
    if (regression) {
      if (!r.regression) throw Error(ErrorCode::LengthMismatch, "report lacks regression metrics");
      return {r.regression->mae, r.regression->pcc};
    }
    if (!r.classification) throw Error(ErrorCode::LengthMismatch, "report lacks classification metrics");
    const auto& c = *r.classification;
    return {c.acc, c.f1, c.roc_auc, c.g_mean, c.mcc};
  };
  std::string out = "fold";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  std::vector<std::vector<double>> columns(names.size());
  for (const auto& r : reports) {
    out += csv_field(r.fold_id);
    const auto v = values(r);
    for (std::size_t i = 0; i < v.size(); ++i) {
      out += "," + format_double(v[i]);
      columns[i].push_back(v[i]);
    }
    out += '\n';
  }
  out += "mean±std";
  for (const auto& col : columns) {
    double mean = 0.0;
    for (double x : col) mean += x;
    mean = col.empty() ? 0.0 : mean / static_cast<double>(col.size());
    double ss = 0.0;
    for (double x : col) ss += (x - mean) * (x - mean);
    const double sd = col.size() > 1 ? std::sqrt(ss / static_cast<double>(col.size() - 1)) : 0.0;
    out += "," + format_double(mean) + "±" + format_double(sd);
  }
  out += '\n';
  return out;
}

// ---- dataset assembly ------------------------------------------------------

std::string antibody_key(const PairRecord& r) {
  return r.ab_heavy_seq + "|" + r.ab_light_seq + "|" + r.ab_structure_path.value_or("") + "|" +
         join(r.ab_chains, ';');
}

std::string antigen_key(const PairRecord& r) {
  return r.ag_seq + "|" + r.ag_structure_path.value_or("") + "|" + join(r.ag_chains, ';');
}

model::Dataset assemble_dataset(std::span<const PairRecord> records, const graphs::EmbeddingStore& embeddings,
                                const StructureLookup& structures, model::Task task, bool check_labels) {
  model::Dataset ds;
  std::unordered_map<std::string, std::size_t> ab_index, ag_index;
  auto pooled = [&](const std::string& seq) -> std::vector<double> {
    if (seq.empty()) return {};
    const auto* m = embeddings.find(seq);
    return m ? m->mean_pool() : std::vector<double>{};
  };
  auto structure = [&](const std::optional<std::string>& path, const std::vector<std::string>& chains) {
    return path && structures ? structures(*path, chains) : nullptr;
  };
  for (const auto& r : records) {
    const bool neutralization = r.label_kind == LabelKind::Neutralization;
    if (check_labels && neutralization != (task == model::Task::Neutralization)) {
      throw Error(ErrorCode::BadManifest, "pair '" + r.pair_id + "' has label_kind " + to_string(r.label_kind) +
                                              ", which does not suit the " + model::to_string(task) + " task");
    }
    const std::string ak = antibody_key(r);
    auto [ait, anew] = ab_index.try_emplace(ak, ds.antibodies.size());
    if (anew) {
      ds.antibodies.push_back({ak, structure(r.ab_structure_path, r.ab_chains), pooled(r.ab_heavy_seq),
                               pooled(r.ab_light_seq)});
    }
    const std::string gk = antigen_key(r);
    auto [git, gnew] = ag_index.try_emplace(gk, ds.antigens.size());
    if (gnew) ds.antigens.push_back({gk, structure(r.ag_structure_path, r.ag_chains), pooled(r.ag_seq)});
    ds.pairs.push_back({r.pair_id, ait->second, git->second, r.label});
  }
  return ds;
}

}  // namespace mulaaip::data
