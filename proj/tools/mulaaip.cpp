// Command-line entry point: featurize, split, train, evaluate, predict.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mulaaip/binary_io.hpp"
#include "mulaaip/data.hpp"
#include "mulaaip/error.hpp"
#include "mulaaip/pipeline.hpp"
#include "mulaaip/run_config.hpp"

namespace fs = std::filesystem;
using namespace mulaaip;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::string flag_name(const char* key) {
  std::string s = key;
  for (char& c : s) {
    if (c == '_') c = '-';
  }
  return "--" + s;
}

// Raw values of every key given on the command line.
struct FlagValues {
  std::map<std::string, std::string> text;
  std::map<std::string, bool> flags;
  std::string config_path;
};

void add_config_flags(CLI::App& cmd, FlagValues& v) {
  cmd.add_option("--config", v.config_path, "JSON config file; flags override its keys");
  for (const auto& key : config_keys()) {
    if (key.kind == ConfigKind::Bool) {
      cmd.add_flag(flag_name(key.name), v.flags[key.name], key.help);
    } else {
      cmd.add_option(flag_name(key.name), v.text[key.name], key.help);
    }
  }
}

RunConfig resolve_config(const CLI::App& cmd, const FlagValues& v) {
  nlohmann::json doc = nlohmann::json::object();
  if (!v.config_path.empty()) {
    std::string text;
    try {
      text = read_file(v.config_path);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, std::string("cannot read config: ") + e.what());
    }
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigError, v.config_path + ": " + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::ConfigError, v.config_path + ": expected a JSON object");
  }
  for (const auto& key : config_keys()) {
    if (cmd.count(flag_name(key.name)) == 0) continue;
    doc[key.name] = key.kind == ConfigKind::Bool ? nlohmann::json(v.flags.at(key.name))
                                                 : config_value_from_text(key, v.text.at(key.name));
  }
  return config_from_json(doc);
}

void write_out(const RunConfig& cfg, const std::string& name, const std::string& contents) {
  fs::create_directories(cfg.out);
  write_file((fs::path(cfg.out) / name).string(), contents);
}

int cmd_featurize(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw Error(ErrorCode::ConfigError, "config key 'manifest': required");
  const auto records = data::parse_manifest(read_file(cfg.manifest));
  const auto report = pipeline::featurize(cfg, records, fs::path(cfg.manifest).parent_path().string());
  write_out(cfg, "featurize_errors.csv", pipeline::format_failures_csv(report.failures));
  std::printf("graphs %zu (antibody %zu, antigen %zu), cache hits %zu, computed %zu, failures %zu\n",
              report.graphs.size(), report.antibody_graphs, report.antigen_graphs, report.cache_hits,
              report.computed, report.failures.size());
  for (const auto& f : report.failures) {
    std::fprintf(stderr, "featurize: pair %s (%s): %s\n", f.pair_id.c_str(), f.side.c_str(), f.message.c_str());
  }
  return report.attempted > 0 && report.graphs.empty() ? kExitData : 0;
}

int cmd_split(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw Error(ErrorCode::ConfigError, "config key 'manifest': required");
  const auto records = data::parse_manifest(read_file(cfg.manifest));
  std::vector<data::Fold> folds;
  if (cfg.group_by == "none") {
    folds = data::kfold_split(records.size(), cfg.folds, cfg.seed);
  } else {
    std::vector<std::string> groups;
    for (const auto& r : records) {
      groups.push_back(cfg.group_by == "antibody" ? data::antibody_key(r) : data::antigen_key(r));
    }
    folds = data::kfold_split_grouped(groups, cfg.folds, cfg.seed);
  }
  std::vector<std::size_t> fold_of(records.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t i : folds[f].test) fold_of[i] = f;
  }
  std::string out = "pair_id,fold\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out += data::csv_field(records[i].pair_id) + "," + std::to_string(fold_of[i]) + "\n";
  }
  write_out(cfg, "folds.csv", out);
  std::printf("%zu records in %zu folds\n", records.size(), folds.size());
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const auto loaded = pipeline::load(cfg);
  const auto outcomes = pipeline::train_cross_validation(cfg, loaded);
  for (const auto& o : outcomes) {
    std::printf("fold %zu: best epoch %zu, val loss %s\n", o.fold, o.training.best_epoch,
                data::format_double(o.training.best_val_metric).c_str());
  }
  std::printf("wrote %s\n", (fs::path(cfg.out) / "metrics.csv").string().c_str());
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  const auto loaded = pipeline::load(cfg);
  const auto ev = pipeline::evaluate(cfg, loaded);
  const std::vector<data::MetricReport> reports{ev.metrics};
  write_out(cfg, "metrics.csv", data::format_metrics_csv(reports, cfg.task));
  write_out(cfg, "predictions.csv", pipeline::format_predictions_csv(loaded.records, ev.pairs, ev.predictions));
  std::printf("pairs %zu\nloss %s\n", ev.pairs.size(), data::format_double(ev.loss).c_str());
  if (const auto& r = ev.metrics.regression) {
    std::printf("mae %s\npcc %s\n", data::format_double(r->mae).c_str(), data::format_double(r->pcc).c_str());
  }
  if (const auto& c = ev.metrics.classification) {
    std::printf("acc %s\nf1 %s\nroc_auc %s\ng_mean %s\nmcc %s\n", data::format_double(c->acc).c_str(),
                data::format_double(c->f1).c_str(), data::format_double(c->roc_auc).c_str(),
                data::format_double(c->g_mean).c_str(), data::format_double(c->mcc).c_str());
  }
  return 0;
}

int cmd_predict(const RunConfig& cfg) {
  const auto loaded = pipeline::load(cfg, false);
  const auto preds = pipeline::predict(cfg, loaded);
  std::vector<std::size_t> all(preds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  write_out(cfg, "predictions.csv", pipeline::format_predictions_csv(loaded.records, all, preds));
  std::printf("wrote %zu predictions to %s\n", preds.size(),
              (fs::path(cfg.out) / "predictions.csv").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Antibody-antigen interaction predictor"};
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
  };
  const Command commands[] = {
      {"featurize", "build the structural-graph cache for a manifest", cmd_featurize},
      {"split", "write the cross-validation fold assignment", cmd_split},
      {"train", "k-fold training with per-fold checkpoints and metrics", cmd_train},
      {"evaluate", "score a checkpoint on a manifest", cmd_evaluate},
      {"predict", "write predictions for every manifest record", cmd_predict},
  };
  std::vector<FlagValues> values(std::size(commands));
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i].name, commands[i].help);
    add_config_flags(*sub, values[i]);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return commands[i].run(resolve_config(*subs[i], values[i]));
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.category()) {
      case ErrorCategory::Config: return kExitConfig;
      case ErrorCategory::Data: return kExitData;
      case ErrorCategory::Internal: return 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return 1;
}
