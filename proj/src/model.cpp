#include "mulaaip/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_set>

#include "mulaaip/error.hpp"
#include "mulaaip/optim.hpp"

namespace mulaaip::model {

std::string to_string(Task task) { return task == Task::Affinity ? "affinity" : "neutralization"; }

Task parse_task(const std::string& name) {
  if (name == "affinity") return Task::Affinity;
  if (name == "neutralization") return Task::Neutralization;
  throw Error(ErrorCode::ConfigError, "task: expected affinity or neutralization, got '" + name + "'");
}

namespace {

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ConfigError, std::string(field) + ": " + what);
}

std::size_t residue_edge_dim(const basis::BasisConfig& b) { return b.tbf_size() + b.sbf_size(); }
std::size_t backbone_edge_dim(const basis::BasisConfig& b) { return 3 * b.sbf_size(); }
std::size_t side_edge_dim(const basis::BasisConfig& b) { return b.rbf_size(); }

constexpr std::size_t kAminoAcidClasses = 21;
constexpr std::size_t kTorusDim = 8;

nn::Tensor column(std::span<const double> values) {
  return nn::Tensor(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

}  // namespace

void ModelConfig::validate() const {
  basis.validate();
  require(plm_dim > 0 || !use_sequence, "plm_dim", "must be positive when the sequence branch is on");
  require(embed_dim > 0, "embed_dim", "must be positive");
  require(hidden > 0, "hidden", "must be positive");
  require(gat_layers > 0, "gat_layers", "must be positive");
  require(gcn_layers > 0, "gcn_layers", "must be positive");
  require(knn_k > 0, "knn_k", "must be positive");
  require(norm_scale > 0.0, "norm_scale", "must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout", "must lie in [0, 1)");
  require(leaky_slope >= 0.0, "leaky_slope", "must be non-negative");
  require(use_structure || use_sequence, "use_structure", "structure and sequence branches cannot both be off");
}

void LossConfig::validate() const {
  require(lambda_w >= 0.0, "lambda_w", "must be non-negative");
  require(lambda_ab >= 0.0, "lambda_ab", "must be non-negative");
  require(lambda_ag >= 0.0, "lambda_ag", "must be non-negative");
}

void TrainConfig::validate() const {
  require(lr > 0.0, "lr", "must be positive");
  require(epochs > 0, "epochs", "must be positive");
  require(batch_size > 0, "batch_size", "must be positive");
  require(patience > 0, "patience", "must be positive");
  loss.validate();
}

// ---- losses ----------------------------------------------------------------

Var penalty_term(nn::Tape& tape, const Penalties& p, const LossConfig& cfg) {
  Var total = tape.constant(nn::Tensor::scalar(0.0));
  auto adjacency = [&](const std::optional<Var>& w, std::size_t nodes, double lambda) {
    if (lambda == 0.0 || nodes == 0) return;
    Var norm = nn::add_scalar(w ? nn::sum_all(nn::abs(*w)) : tape.constant(nn::Tensor::scalar(0.0)),
                              static_cast<double>(nodes));
    total = nn::add(total, nn::scale(norm, lambda));
  };
  adjacency(p.antibody_weights, p.antibody_nodes, cfg.lambda_ab);
  adjacency(p.antigen_weights, p.antigen_nodes, cfg.lambda_ag);
  if (cfg.lambda_w != 0.0) {
    for (nn::Parameter* w : p.weights) {
      total = nn::add(total, nn::scale(nn::sum_all(nn::square(tape.parameter(*w))), cfg.lambda_w));
    }
  }
  return total;
}

namespace {

void check_lengths(Var preds, std::span<const double> labels) {
  if (preds.cols() != 1 || preds.rows() != labels.size() || labels.empty()) {
    throw Error(ErrorCode::LengthMismatch, "predictions " + preds.value().shape_string() + " vs " +
                                               std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

Var loss_affinity(nn::Tape& tape, Var preds, std::span<const double> labels, const Penalties& penalties,
                  const LossConfig& cfg) {
  check_lengths(preds, labels);
  Var data = nn::sum_all(nn::square(nn::sub(tape.constant(column(labels)), preds)));
  return nn::add(data, penalty_term(tape, penalties, cfg));
}

Var loss_neutralization(nn::Tape& tape, Var probs, std::span<const double> labels, const Penalties& penalties,
                        const LossConfig& cfg) {
  check_lengths(probs, labels);
  Var p = nn::clamp(probs, 1e-7, 1.0 - 1e-7);
  std::vector<double> flipped(labels.size());
  std::transform(labels.begin(), labels.end(), flipped.begin(), [](double y) { return 1.0 - y; });
  Var pos = nn::mul(tape.constant(column(labels)), nn::log(p));
  Var neg = nn::mul(tape.constant(column(flipped)), nn::log(nn::add_scalar(nn::scale(p, -1.0), 1.0)));
  Var data = nn::scale(nn::sum_all(nn::add(pos, neg)), -1.0);
  return nn::add(data, penalty_term(tape, penalties, cfg));
}

// ---- model -----------------------------------------------------------------

MulaaipModel::MulaaipModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t h = cfg_.hidden;
  const double slope = cfg_.leaky_slope;

  aa_embedding_ = &store_.add_xavier("aa_embedding", kAminoAcidClasses, cfg_.embed_dim, rng);
  auto make_stack = [&](const std::string& name, std::size_t in, std::size_t edge_dim) {
    std::vector<layers::GatBlock> stack;
    for (std::size_t l = 0; l < cfg_.gat_layers; ++l) {
      stack.push_back(layers::make_gat_block(store_, name + std::to_string(l), l == 0 ? in : h, h, edge_dim,
                                             rng, slope));
    }
    return stack;
  };
  residue_stack_ = make_stack("gat.residue", cfg_.embed_dim, residue_edge_dim(cfg_.basis));
  backbone_stack_ = make_stack("gat.backbone", cfg_.embed_dim, backbone_edge_dim(cfg_.basis));
  side_stack_ = make_stack("gat.side", cfg_.embed_dim + kTorusDim, side_edge_dim(cfg_.basis));

  const std::size_t plm = std::max<std::size_t>(cfg_.plm_dim, 1);
  seq_antibody_ = {layers::make_linear(store_, "seq.antibody.fc1", plm, h, rng),
                   layers::make_linear(store_, "seq.antibody.fc2", h, h, rng)};
  seq_antigen_ = {layers::make_linear(store_, "seq.antigen.fc1", plm, h, rng),
                  layers::make_linear(store_, "seq.antigen.fc2", h, h, rng)};
  gcn_antibody_ = layers::make_gcn(store_, "gcn.antibody", h, h, cfg_.gcn_layers, rng, cfg_.norm_scale,
                                   cfg_.dropout, slope);
  gcn_antigen_ = layers::make_gcn(store_, "gcn.antigen", h, h, cfg_.gcn_layers, rng, cfg_.norm_scale,
                                  cfg_.dropout, slope);

  // Entity vector: structure readout, presence flag, two sequence halves.
  const std::size_t entity_dim = h + 1 + 2 * h;
  std::size_t fused_dim = entity_dim;
  if (cfg_.use_smlp) {
    smlp_.push_back(layers::make_linear(store_, "smlp0", entity_dim, h, rng));
    smlp_.push_back(layers::make_linear(store_, "smlp1", h, h, rng));
    fused_dim = h;
  }
  head_.push_back(layers::make_linear(store_, "head0", 2 * fused_dim, h, rng));
  head_.push_back(layers::make_linear(store_, "head1", h, 1, rng));

  label_mean_ = &store_.add("label.mean", nn::Tensor::scalar(0.0), false, false);
  label_std_ = &store_.add("label.std", nn::Tensor::scalar(1.0), false, false);
}

void MulaaipModel::set_label_scaling(double mean, double stddev) {
  if (!std::isfinite(mean) || !(stddev > 0.0) || !std::isfinite(stddev)) {
    throw Error(ErrorCode::NonFinite, "label scaling needs a finite mean and positive deviation");
  }
  label_mean_->value[0] = mean;
  label_std_->value[0] = stddev;
}

double MulaaipModel::label_mean() const { return label_mean_->value[0]; }
double MulaaipModel::label_std() const { return label_std_->value[0]; }

void MulaaipModel::check_dataset(const Dataset& data) const {
  auto check_structure = [&](const std::shared_ptr<const graphs::StructuralGraph>& g, const std::string& key) {
    if (!cfg_.use_structure) return;
    if (!g) {
      if (cfg_.sequence_only) return;
      throw Error(ErrorCode::MissingModality, "no structure for entity '" + key + "'");
    }
    if (!(g->basis == cfg_.basis)) {
      throw Error(ErrorCode::DimMismatch, "structure of '" + key + "' was encoded with another basis");
    }
  };
  auto check_embedding = [&](const std::vector<double>& e, const std::string& key, bool optional) {
    if (!cfg_.use_sequence) return;
    if (e.empty() && optional) return;
    if (e.empty()) throw Error(ErrorCode::MissingModality, "no sequence embedding for entity '" + key + "'");
    if (e.size() != cfg_.plm_dim) {
      throw Error(ErrorCode::DimMismatch, "embedding of '" + key + "' has width " + std::to_string(e.size()) +
                                              ", model expects " + std::to_string(cfg_.plm_dim));
    }
  };
  for (const auto& ab : data.antibodies) {
    check_structure(ab.structure, ab.key);
    check_embedding(ab.heavy, ab.key, false);
    check_embedding(ab.light, ab.key, true);
  }
  for (const auto& ag : data.antigens) {
    check_structure(ag.structure, ag.key);
    check_embedding(ag.embedding, ag.key, false);
  }
  for (const auto& p : data.pairs) {
    if (p.antibody >= data.antibodies.size() || p.antigen >= data.antigens.size()) {
      throw Error(ErrorCode::MissingModality, "pair '" + p.id + "' references an unknown entity");
    }
  }
}

Var MulaaipModel::antibody_sequence_input(nn::Tape& tape, const Dataset& data, bool light) const {
  nn::Tensor x(data.antibodies.size(), cfg_.plm_dim, 0.0);
  for (std::size_t i = 0; i < data.antibodies.size(); ++i) {
    const auto& src = light ? data.antibodies[i].light : data.antibodies[i].heavy;
    std::copy(src.begin(), src.end(), x.values().begin() + static_cast<std::ptrdiff_t>(i * cfg_.plm_dim));
  }
  return tape.constant(std::move(x));
}

Var MulaaipModel::antigen_sequence_input(nn::Tape& tape, const Dataset& data) const {
  nn::Tensor x(data.antigens.size(), cfg_.plm_dim, 0.0);
  for (std::size_t i = 0; i < data.antigens.size(); ++i) {
    const auto& src = data.antigens[i].embedding;
    std::copy(src.begin(), src.end(), x.values().begin() + static_cast<std::ptrdiff_t>(i * cfg_.plm_dim));
  }
  return tape.constant(std::move(x));
}

Var MulaaipModel::run_sequence(nn::Tape& tape, const SequencePipeline& pipe, Var pooled, Rng& rng,
                               bool training) const {
  Var x = nn::dropout(pooled, cfg_.dropout, rng, training);
  Var u = nn::leaky_relu(pipe.fc1(tape, x), cfg_.leaky_slope);
  return nn::add(pipe.fc2(tape, u), u);
}

Var MulaaipModel::run_structure(nn::Tape& tape, const graphs::StructuralGraph& graph) {
  const std::size_t n = graph.num_nodes;
  std::vector<std::size_t> classes(graph.node_class.begin(), graph.node_class.end());
  Var v0 = nn::gather_rows(tape.parameter(*aa_embedding_), classes);
  nn::Tensor torus(n, kTorusDim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(graph.side_chain_feat[i].begin(), graph.side_chain_feat[i].end(),
              torus.values().begin() + static_cast<std::ptrdiff_t>(i * kTorusDim));
  }
  const auto index = layers::EdgeIndex::from_edges(graph.edges, n);
  auto run = [&](const std::vector<layers::GatBlock>& stack, Var v, const nn::Tensor& feats) {
    Var e = tape.constant(feats);
    for (std::size_t l = 0; l < stack.size(); ++l) {
      v = layers::gat_forward(tape, stack[l], v, index, e).nodes;
      if (l + 1 < stack.size()) v = nn::leaky_relu(v, cfg_.leaky_slope);
    }
    return v;
  };
  Var side_input = nn::concat_cols({v0, tape.constant(std::move(torus))});
  Var nodes = nn::add(nn::add(run(residue_stack_, v0, graph.edge_feat_residue),
                              run(backbone_stack_, v0, graph.edge_feat_backbone)),
                      run(side_stack_, side_input, graph.edge_feat_side));
  return layers::readout(nodes);
}

Var MulaaipModel::run_smlp(nn::Tape& tape, Var z) const {
  for (std::size_t l = 0; l < smlp_.size(); ++l) {
    z = smlp_[l](tape, z);
    if (l + 1 < smlp_.size()) z = nn::leaky_relu(z, cfg_.leaky_slope);
  }
  return z;
}

Relations MulaaipModel::build_relations(const Dataset& data) {
  Relations rel;
  if (!cfg_.use_sequence) return rel;
  nn::Tape tape(false);
  Rng unused(0);
  Var heavy = run_sequence(tape, seq_antibody_, antibody_sequence_input(tape, data, false), unused, false);
  Var light = run_sequence(tape, seq_antibody_, antibody_sequence_input(tape, data, true), unused, false);
  Var antigen = run_sequence(tape, seq_antigen_, antigen_sequence_input(tape, data), unused, false);
  std::vector<std::string> ab_ids, ag_ids;
  for (const auto& ab : data.antibodies) ab_ids.push_back(ab.key);
  for (const auto& ag : data.antigens) ag_ids.push_back(ag.key);
  rel.antibody = graphs::build_relation_graph(std::move(ab_ids), nn::concat_cols({heavy, light}).value(), cfg_.knn_k);
  rel.antigen = graphs::build_relation_graph(std::move(ag_ids), antigen.value(), cfg_.knn_k);
  return rel;
}

ForwardResult MulaaipModel::forward(nn::Tape& tape, const Dataset& data, const Relations& relations,
                                    std::span<const std::size_t> pairs, Rng& rng, bool training) {
  const std::size_t h = cfg_.hidden;
  const std::size_t batch = pairs.size();
  std::vector<std::size_t> ab_rows, ag_rows;
  for (std::size_t p : pairs) {
    if (p >= data.pairs.size()) throw Error(ErrorCode::LengthMismatch, "pair index out of range");
    ab_rows.push_back(data.pairs[p].antibody);
    ag_rows.push_back(data.pairs[p].antigen);
  }

  ForwardResult result;
  Var ab_seq = tape.constant(nn::Tensor(batch, 2 * h, 0.0));
  Var ag_seq = tape.constant(nn::Tensor(batch, 2 * h, 0.0));
  if (cfg_.use_sequence) {
    if (relations.antibody.size() != data.antibodies.size() || relations.antigen.size() != data.antigens.size()) {
      throw Error(ErrorCode::LengthMismatch, "relation graphs were built for a different dataset");
    }
    Var heavy = run_sequence(tape, seq_antibody_, antibody_sequence_input(tape, data, false), rng, training);
    Var light = run_sequence(tape, seq_antibody_, antibody_sequence_input(tape, data, true), rng, training);
    Var antigen = run_sequence(tape, seq_antigen_, antigen_sequence_input(tape, data), rng, training);

    Var ab_w = layers::pattern_cosine(nn::concat_cols({heavy, light}), relations.antibody.pattern);
    Var ag_w = layers::pattern_cosine(antigen, relations.antigen.pattern);
    Var gh = layers::gcn_forward(tape, gcn_antibody_, heavy, relations.antibody.pattern, ab_w, rng, training);
    Var gl = layers::gcn_forward(tape, gcn_antibody_, light, relations.antibody.pattern, ab_w, rng, training);
    Var gg = layers::gcn_forward(tape, gcn_antigen_, antigen, relations.antigen.pattern, ag_w, rng, training);
    ab_seq = nn::gather_rows(nn::concat_cols({gh, gl}), ab_rows);
    ag_seq = nn::gather_rows(nn::concat_cols({gg, gg}), ag_rows);

    result.antibody_weights = ab_w;
    result.antigen_weights = ag_w;
    result.antibody_nodes = data.antibodies.size();
    result.antigen_nodes = data.antigens.size();
  }

  // One readout per distinct entity in the batch, then gathered per pair.
  auto structure_part = [&](auto const& entities, const std::vector<std::size_t>& rows) {
    if (!cfg_.use_structure) return tape.constant(nn::Tensor(rows.size(), h + 1, 0.0));
    std::map<std::size_t, std::size_t> slot;
    std::vector<Var> parts;
    for (std::size_t r : rows) {
      if (slot.contains(r)) continue;
      slot.emplace(r, parts.size());
      const auto& ent = entities[r];
      if (!ent.structure) {
        if (!cfg_.sequence_only) throw Error(ErrorCode::MissingModality, "no structure for entity '" + ent.key + "'");
        parts.push_back(tape.constant(nn::Tensor(1, h + 1, 0.0)));
      } else {
        parts.push_back(nn::concat_cols({run_structure(tape, *ent.structure), tape.constant(nn::Tensor::scalar(1.0))}));
      }
    }
    std::vector<std::size_t> gather;
    for (std::size_t r : rows) gather.push_back(slot.at(r));
    return nn::gather_rows(nn::concat_rows(parts), gather);
  };
  Var ab_struct = structure_part(data.antibodies, ab_rows);
  Var ag_struct = structure_part(data.antigens, ag_rows);

  Var zb = nn::concat_cols({ab_struct, ab_seq});
  Var zg = nn::concat_cols({ag_struct, ag_seq});
  if (cfg_.use_smlp) {
    zb = run_smlp(tape, zb);
    zg = run_smlp(tape, zg);
  }
  Var z = nn::concat_cols({zb, zg});
  for (std::size_t l = 0; l < head_.size(); ++l) {
    z = head_[l](tape, z);
    if (l + 1 < head_.size()) z = nn::leaky_relu(z, cfg_.leaky_slope);
  }
  result.output = z;
  return result;
}

Penalties MulaaipModel::penalties(const ForwardResult& r) {
  Penalties p;
  p.antibody_weights = r.antibody_weights;
  p.antibody_nodes = r.antibody_nodes;
  p.antigen_weights = r.antigen_weights;
  p.antigen_nodes = r.antigen_nodes;
  for (nn::Parameter* w : store_.trainable()) {
    if (w->regularized) p.weights.push_back(w);
  }
  return p;
}

std::vector<double> MulaaipModel::predict(const Dataset& data, const Relations& relations,
                                          std::span<const std::size_t> pairs) {
  if (pairs.empty()) return {};
  nn::Tape tape(false);
  Rng unused(0);
  const ForwardResult r = forward(tape, data, relations, pairs, unused, false);
  std::vector<double> out(r.output.value().values());
  for (double& v : out) {
    v = cfg_.task == Task::Affinity ? v * label_std() + label_mean() : 1.0 / (1.0 + std::exp(-v));
  }
  return out;
}

// ---- training --------------------------------------------------------------

namespace {

std::vector<double> scaled_labels(const MulaaipModel& model, const Dataset& data,
                                  std::span<const std::size_t> pairs) {
  std::vector<double> y;
  y.reserve(pairs.size());
  for (std::size_t p : pairs) {
    const double label = data.pairs[p].label;
    y.push_back(model.config().task == Task::Affinity ? (label - model.label_mean()) / model.label_std() : label);
  }
  return y;
}

Var data_loss(nn::Tape& tape, const MulaaipModel& model, Var output, std::span<const double> labels,
              const Penalties& penalties, const LossConfig& loss) {
  if (model.config().task == Task::Affinity) return loss_affinity(tape, output, labels, penalties, loss);
  return loss_neutralization(tape, nn::sigmoid(output), labels, penalties, loss);
}

}  // namespace

double validation_loss(MulaaipModel& model, const Dataset& data, const Relations& relations,
                       std::span<const std::size_t> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptySplit, "validation split is empty");
  nn::Tape tape(false);
  Rng unused(0);
  const ForwardResult r = model.forward(tape, data, relations, pairs, unused, false);
  const std::vector<double> y = scaled_labels(model, data, pairs);
  const Var total = data_loss(tape, model, r.output, y, Penalties{}, LossConfig{0.0, 0.0, 0.0});
  return total.value()[0] / static_cast<double>(pairs.size());
}

TrainResult train(MulaaipModel& model, const Dataset& data, std::span<const std::size_t> train_pairs,
                  std::span<const std::size_t> val_pairs, const TrainConfig& cfg) {
  cfg.validate();
  if (train_pairs.empty()) throw Error(ErrorCode::EmptySplit, "training split is empty");
  if (val_pairs.empty()) throw Error(ErrorCode::EmptySplit, "validation split is empty");
  const std::unordered_set<std::size_t> train_set(train_pairs.begin(), train_pairs.end());
  for (std::size_t v : val_pairs) {
    if (train_set.contains(v)) {
      throw Error(ErrorCode::EmptySplit, "pair '" + data.pairs.at(v).id + "' is in both training and validation");
    }
  }
  model.check_dataset(data);

  if (model.config().task == Task::Affinity) {
    double mean = 0.0;
    for (std::size_t p : train_pairs) mean += data.pairs.at(p).label;
    mean /= static_cast<double>(train_pairs.size());
    double var = 0.0;
    for (std::size_t p : train_pairs) var += (data.pairs[p].label - mean) * (data.pairs[p].label - mean);
    const double sd = std::sqrt(var / static_cast<double>(train_pairs.size()));
    model.set_label_scaling(mean, sd > 1e-12 ? sd : 1.0);
  }

  Rng rng(cfg.seed);
  nn::Adam adam(cfg.lr);
  const std::vector<nn::Parameter*> trainable = model.params().trainable();
  std::vector<std::size_t> order(train_pairs.begin(), train_pairs.end());

  TrainResult result;
  result.best_val_metric = std::numeric_limits<double>::infinity();
  std::vector<nn::Tensor> best = model.params().snapshot();
  std::size_t stale = 0;
  Relations relations = model.build_relations(data);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      nn::Tape tape;
      const ForwardResult r = model.forward(tape, data, relations, batch, rng, true);
      const std::vector<double> y = scaled_labels(model, data, batch);
      Var loss = data_loss(tape, model, r.output, y, model.penalties(r), cfg.loss);
      model.params().zero_grad();
      tape.backward(loss);
      adam.step(trainable);
      epoch_loss += loss.value()[0];
    }
    relations = model.build_relations(data);
    const double val = validation_loss(model, data, relations, val_pairs);
    result.history.push_back({epoch, epoch_loss / static_cast<double>(order.size()), val});
    if (val < result.best_val_metric) {
      result.best_val_metric = val;
      result.best_epoch = epoch;
      best = model.params().snapshot();
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  model.params().restore(best);
  return result;
}

}  // namespace mulaaip::model
