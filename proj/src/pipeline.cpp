#include "mulaaip/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <optional>
#include <set>
#include <thread>

#include "mulaaip/binary_io.hpp"
#include "mulaaip/error.hpp"
#include "mulaaip/feature_cache.hpp"
#include "mulaaip/optim.hpp"
#include "mulaaip/rng.hpp"

namespace mulaaip::pipeline {

namespace fs = std::filesystem;

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// failure in index order.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(jobs, 1), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  const fs::path p(path);
  return (p.is_absolute() ? p : fs::path(base_dir) / p).lexically_normal().string();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::vector<double> labels_of(const model::Dataset& ds, const std::vector<std::size_t>& pairs) {
  std::vector<double> y;
  for (std::size_t p : pairs) y.push_back(ds.pairs[p].label);
  return y;
}

nlohmann::json ids_of(const model::Dataset& ds, const std::vector<std::size_t>& pairs) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t p : pairs) out.push_back(ds.pairs[p].id);
  return out;
}

}  // namespace

FeaturizeReport featurize(const RunConfig& cfg, const std::vector<data::PairRecord>& records,
                          const std::string& base_dir) {
  struct Use {
    std::string pair_id;
    bool antibody;
  };
  std::vector<GraphKey> jobs;
  std::map<GraphKey, std::vector<Use>> uses;
  auto add = [&](const std::optional<std::string>& path, const std::vector<std::string>& chains,
                 const std::string& pair_id, bool antibody) {
    if (!path) return;
    GraphKey key{resolve(base_dir, *path), chains};
    auto [it, fresh] = uses.try_emplace(key);
    if (fresh) jobs.push_back(key);
    it->second.push_back({pair_id, antibody});
  };
  for (const auto& r : records) {
    add(r.ab_structure_path, r.ab_chains, r.pair_id, true);
    add(r.ag_structure_path, r.ag_chains, r.pair_id, false);
  }

  FeaturizeReport report;
  report.attempted = jobs.size();
  if (jobs.empty()) return report;
  const FeatureCache cache(cfg.resolved_cache_dir(), cfg.basis());
  std::vector<std::optional<FeatureCache::Entry>> entries(jobs.size());
  std::vector<std::string> messages(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    try {
      entries[i] = cache.get(jobs[i].first, jobs[i].second);
    } catch (const std::exception& e) {
      messages[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& key = jobs[i];
    const auto& users = uses.at(key);
    if (!entries[i]) {
      std::set<std::pair<std::string, bool>> seen;
      for (const auto& u : users) {
        if (seen.insert({u.pair_id, u.antibody}).second) {
          report.failures.push_back({u.pair_id, u.antibody ? "antibody" : "antigen", messages[i]});
        }
      }
      continue;
    }
    (entries[i]->hit ? report.cache_hits : report.computed)++;
    report.graphs.emplace(key, entries[i]->graph);
    const bool ab = std::any_of(users.begin(), users.end(), [](const Use& u) { return u.antibody; });
    const bool ag = std::any_of(users.begin(), users.end(), [](const Use& u) { return !u.antibody; });
    report.antibody_graphs += ab ? 1 : 0;
    report.antigen_graphs += ag ? 1 : 0;
  }
  return report;
}

std::string format_failures_csv(const std::vector<FeatureFailure>& failures) {
  std::string out = "pair_id,side,error\n";
  for (const auto& f : failures) {
    out += data::csv_field(f.pair_id) + "," + f.side + "," + data::csv_field(f.message) + "\n";
  }
  return out;
}

LoadedData load(const RunConfig& cfg, bool check_labels) {
  if (cfg.manifest.empty()) throw Error(ErrorCode::ConfigError, "config key 'manifest': required");
  LoadedData d;
  d.records = data::parse_manifest(read_file(cfg.manifest));
  if (d.records.empty()) throw Error(ErrorCode::BadManifest, "manifest " + cfg.manifest + " has no records");
  const std::string base = fs::path(cfg.manifest).parent_path().string();
  if (!cfg.ablate_structure) d.features = featurize(cfg, d.records, base);
  if (!cfg.ablate_sequence) {
    if (cfg.embeddings.empty()) throw Error(ErrorCode::ConfigError, "config key 'embeddings': required");
    d.embeddings = graphs::read_embeddings(read_file(cfg.embeddings));
    d.plm_dim = d.embeddings.dim();
  }
  const GraphMap& graphs = d.features.graphs;
  auto lookup = [&](const std::string& path, const std::vector<std::string>& chains)
      -> std::shared_ptr<const graphs::StructuralGraph> {
    const auto it = graphs.find({resolve(base, path), chains});
    return it == graphs.end() ? nullptr : it->second;
  };
  d.dataset = data::assemble_dataset(d.records, d.embeddings, lookup, cfg.task, check_labels);
  return d;
}

std::string format_history_csv(const model::TrainResult& result) {
  std::string out = "epoch,train_loss,val_metric\n";
  for (const auto& e : result.history) {
    out += std::to_string(e.epoch) + "," + data::format_double(e.train_loss) + "," +
           data::format_double(e.val_metric) + "\n";
  }
  return out;
}

std::string format_predictions_csv(const std::vector<data::PairRecord>& records,
                                   const std::vector<std::size_t>& pairs, const std::vector<double>& preds) {
  std::string out = "pair_id,prediction\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out += data::csv_field(records[pairs[i]].pair_id) + "," + data::format_double(preds[i]) + "\n";
  }
  return out;
}

std::vector<FoldOutcome> train_cross_validation(const RunConfig& cfg, const LoadedData& d) {
  const model::Dataset& ds = d.dataset;
  const std::size_t n = ds.pairs.size();
  std::vector<data::Fold> folds;
  if (cfg.group_by == "none") {
    folds = data::kfold_split(n, cfg.folds, cfg.seed);
  } else {
    std::vector<std::string> groups;
    for (const auto& r : d.records) {
      groups.push_back(cfg.group_by == "antibody" ? data::antibody_key(r) : data::antigen_key(r));
    }
    folds = data::kfold_split_grouped(groups, cfg.folds, cfg.seed);
  }

  const fs::path out(cfg.out);
  ensure_dir(out);
  write_file((out / "config.json").string(), config_to_json(cfg).dump(2) + "\n");
  if (!d.features.failures.empty()) {
    write_file((out / "featurize_errors.csv").string(), format_failures_csv(d.features.failures));
  }

  std::vector<FoldOutcome> outcomes(folds.size());
  parallel_for(folds.size(), cfg.jobs, [&](std::size_t f) {
    Rng fold_rng = Rng(cfg.seed).fork(f);
    const std::uint64_t model_seed = fold_rng.next_u64();
    const std::uint64_t train_seed = fold_rng.next_u64();
    const std::uint64_t holdout_seed = fold_rng.next_u64();

    FoldOutcome& o = outcomes[f];
    o.fold = f;
    o.test = folds[f].test;
    std::tie(o.train, o.val) = data::holdout_split(folds[f].train, cfg.val_fraction, holdout_seed);

    model::MulaaipModel m(cfg.model_config(d.plm_dim), model_seed);
    o.training = model::train(m, ds, o.train, o.val, cfg.train_config(train_seed));

    const model::Relations relations = m.build_relations(ds);
    const std::vector<double> preds = m.predict(ds, relations, o.test);
    o.test_metrics = data::evaluate_predictions("fold_" + std::to_string(f), cfg.task, preds, labels_of(ds, o.test));

    const fs::path dir = out / ("fold_" + std::to_string(f));
    ensure_dir(dir);
    nn::save_checkpoint(m.params(), (dir / "model.ckpt").string());
    write_file((dir / "history.csv").string(), format_history_csv(o.training));
    write_file((dir / "predictions.csv").string(), format_predictions_csv(d.records, o.test, preds));
    nlohmann::json split;
    split["train"] = ids_of(ds, o.train);
    split["val"] = ids_of(ds, o.val);
    split["test"] = ids_of(ds, o.test);
    split["best_epoch"] = o.training.best_epoch;
    split["best_val_metric"] = o.training.best_val_metric;
    write_file((dir / "split.json").string(), split.dump(2) + "\n");
  });

  std::vector<data::MetricReport> reports;
  for (const auto& o : outcomes) reports.push_back(o.test_metrics);
  write_file((out / "metrics.csv").string(), data::format_metrics_csv(reports, cfg.task));
  return outcomes;
}

namespace {

std::unique_ptr<model::MulaaipModel> load_model(const RunConfig& cfg, const LoadedData& d) {
  if (cfg.checkpoint.empty()) throw Error(ErrorCode::ConfigError, "config key 'checkpoint': required");
  auto m = std::make_unique<model::MulaaipModel>(cfg.model_config(d.plm_dim), 0);
  nn::load_checkpoint(cfg.checkpoint, m->params());
  return m;
}

}  // namespace

Evaluation evaluate(const RunConfig& cfg, const LoadedData& d) {
  const model::Dataset& ds = d.dataset;
  Evaluation ev;
  if (cfg.subset == "all") {
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) ev.pairs.push_back(i);
  } else {
    if (cfg.split_file.empty()) {
      throw Error(ErrorCode::ConfigError, "config key 'split_file': required when subset is " + cfg.subset);
    }
    nlohmann::json split;
    try {
      split = nlohmann::json::parse(read_file(cfg.split_file));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BadManifest, cfg.split_file + ": " + e.what());
    }
    if (!split.contains(cfg.subset) || !split[cfg.subset].is_array()) {
      throw Error(ErrorCode::BadManifest, cfg.split_file + " lacks a '" + cfg.subset + "' list");
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) index.emplace(ds.pairs[i].id, i);
    for (const auto& id : split[cfg.subset]) {
      const auto it = id.is_string() ? index.find(id.get<std::string>()) : index.end();
      if (it == index.end()) throw Error(ErrorCode::BadManifest, "split lists a pair missing from the manifest");
      ev.pairs.push_back(it->second);
    }
  }
  auto m = load_model(cfg, d);
  m->check_dataset(ds);
  const model::Relations relations = m->build_relations(ds);
  ev.predictions = m->predict(ds, relations, ev.pairs);
  ev.metrics = data::evaluate_predictions("evaluate", cfg.task, ev.predictions, labels_of(ds, ev.pairs));
  ev.loss = model::validation_loss(*m, ds, relations, ev.pairs);
  return ev;
}

std::vector<double> predict(const RunConfig& cfg, const LoadedData& d) {
  auto m = load_model(cfg, d);
  m->check_dataset(d.dataset);
  std::vector<std::size_t> all(d.dataset.pairs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const model::Relations relations = m->build_relations(d.dataset);
  return m->predict(d.dataset, relations, all);
}

}  // namespace mulaaip::pipeline
