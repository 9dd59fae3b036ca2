#include "isl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include "isl/error.hpp"
#include "isl/random.hpp"

namespace isl {

void FeatureConfig::validate() const {
  if (hash_dim == 0 || (hash_dim & (hash_dim - 1)) != 0) {
    throw Error("feature hash_dim must be a power of two");
  }
  if (hash_dim > (std::size_t{1} << 32)) throw Error("feature hash_dim too large");
  if (ngram_order != 1 && ngram_order != 2) throw Error("ngram_order must be 1 or 2");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (epochs < 1) throw Error("epochs must be >= 1");
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (l2 < 0.0) throw Error("L2 penalty must be non-negative");
  if (grouping == Grouping::contains_symbol && new_symbol.empty()) {
    throw Error("contains-symbol grouping needs a new symbol");
  }
}

FeatureVector featurize(const Tokens& tokens, const FeatureConfig& config) {
  const std::uint64_t mask = config.hash_dim - 1;
  FeatureVector out;
  out.reserve(tokens.size() * static_cast<std::size_t>(config.ngram_order));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.push_back(static_cast<std::uint32_t>(fnv1a64(tokens[i]) & mask));
    if (config.ngram_order == 2 && i + 1 < tokens.size()) {
      const std::uint64_t h = fnv1a64(tokens[i + 1], fnv1a64("\x1f", fnv1a64(tokens[i])));
      out.push_back(static_cast<std::uint32_t>(h & mask));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ModelState ModelState::zeros(TaskKind kind, const FeatureConfig& features,
                             std::vector<std::string> symbols) {
  features.validate();
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  if (kind == TaskKind::single_label) {
    symbols.erase(std::remove(symbols.begin(), symbols.end(), kOtherClass), symbols.end());
    symbols.emplace_back(kOtherClass);
  }
  if (symbols.empty()) throw Error("model needs at least one class");
  ModelState m;
  m.kind = kind;
  m.features = features;
  m.classes = std::move(symbols);
  m.weights.assign(features.hash_dim * m.classes.size(), 0.0);
  m.bias.assign(m.classes.size(), 0.0);
  return m;
}

std::optional<std::uint32_t> ModelState::class_index(std::string_view symbol) const {
  // The last single-label class is the OTHER slot and sorts out of order.
  const std::size_t n = kind == TaskKind::single_label ? classes.size() - 1 : classes.size();
  auto first = classes.begin();
  auto last = classes.begin() + static_cast<std::ptrdiff_t>(n);
  auto it = std::lower_bound(first, last, symbol,
                             [](const std::string& a, std::string_view b) { return a < b; });
  if (it != last && *it == symbol) return static_cast<std::uint32_t>(it - first);
  return std::nullopt;
}

Instance make_instance(const ModelState& model, const Example& example, const TrainConfig& config) {
  Instance inst;
  inst.features = featurize(example.tokens, model.features);
  if (model.kind == TaskKind::single_label) {
    auto idx = model.class_index(example.output.label);
    inst.labels.push_back(idx ? *idx : static_cast<std::uint32_t>(model.classes.size() - 1));
  } else {
    for (const std::string& s : example.output.symbols) {
      if (auto idx = model.class_index(s)) inst.labels.push_back(*idx);
    }
  }
  if (config.grouping == Grouping::contains_symbol) {
    inst.group = example.output.contains(config.new_symbol) ? 1 : 0;
  } else {
    if (model.kind != TaskKind::single_label) {
      throw Error("per-symbol grouping requires a single-label task");
    }
    inst.group = inst.labels.front();
  }
  return inst;
}

namespace {

void compute_logits(const ModelState& model, double scale, const FeatureVector& features,
                    std::vector<double>& z) {
  const std::size_t c = model.classes.size();
  z.assign(c, 0.0);
  for (std::uint32_t j : features) {
    const double* row = model.weights.data() + static_cast<std::size_t>(j) * c;
    for (std::size_t k = 0; k < c; ++k) z[k] += row[k];
  }
  for (std::size_t k = 0; k < c; ++k) z[k] = z[k] * scale + model.bias[k];
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Per-example loss; writes dLoss/dLogits into dz.
double example_loss(const ModelState& model, double scale, const Instance& inst,
                    std::vector<double>& z, std::vector<double>& dz) {
  compute_logits(model, scale, inst.features, z);
  const std::size_t c = z.size();
  dz.assign(c, 0.0);
  if (model.kind == TaskKind::single_label) {
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      dz[k] = std::exp(z[k] - zmax);
      sum += dz[k];
    }
    for (double& p : dz) p /= sum;
    const std::uint32_t y = inst.labels.front();
    dz[y] -= 1.0;
    return zmax + std::log(sum) - z[y];
  }
  double loss = 0.0;
  std::vector<bool> positive(c, false);
  for (std::uint32_t y : inst.labels) positive[y] = true;
  for (std::size_t k = 0; k < c; ++k) {
    const double y = positive[k] ? 1.0 : 0.0;
    loss += softplus(z[k]) - y * z[k];
    dz[k] = sigmoid(z[k]) - y;
  }
  return loss;
}

/// Evaluates the batch objective and the per-example weight each example's
/// gradient receives (1/n for ERM, 1/n_g inside the worst group for DRO).
BatchLoss evaluate_batch(const ModelState& model, double scale, std::span<const Instance> batch,
                         const TrainConfig& config, std::vector<double>& losses,
                         std::vector<std::vector<double>>* dzs, std::vector<double>& coeff) {
  if (batch.empty()) throw Error("batch_loss: empty batch");
  const std::size_t n = batch.size();
  losses.resize(n);
  if (dzs != nullptr) dzs->resize(n);
  std::vector<double> z;
  std::vector<double> dz;
  BatchLoss out;
  std::map<std::uint32_t, double> sums;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    losses[i] = example_loss(model, scale, batch[i], z, dz);
    if (dzs != nullptr) (*dzs)[i] = dz;
    total += losses[i];
    sums[batch[i].group] += losses[i];
    ++out.group_sizes[batch[i].group];
  }
  bool first = true;
  double worst = 0.0;
  for (const auto& [g, s] : sums) {
    const double mean = s / static_cast<double>(out.group_sizes[g]);
    out.group_means[g] = mean;
    if (first || mean > worst) {
      worst = mean;
      out.worst_group = g;
      first = false;
    }
  }
  coeff.assign(n, 0.0);
  if (config.objective == Objective::erm) {
    out.loss = total / static_cast<double>(n);
    std::fill(coeff.begin(), coeff.end(), 1.0 / static_cast<double>(n));
  } else {
    out.loss = worst;
    const double w = 1.0 / static_cast<double>(out.group_sizes[out.worst_group]);
    for (std::size_t i = 0; i < n; ++i) {
      if (batch[i].group == out.worst_group) coeff[i] = w;
    }
  }
  if (!std::isfinite(out.loss)) throw Error("batch_loss: non-finite loss");
  return out;
}

}  // namespace

std::vector<double> logits(const ModelState& model, const FeatureVector& features) {
  std::vector<double> z;
  compute_logits(model, 1.0, features, z);
  return z;
}

BatchLoss batch_loss(const ModelState& model, std::span<const Instance> batch,
                     const TrainConfig& config) {
  std::vector<double> losses;
  std::vector<double> coeff;
  return evaluate_batch(model, 1.0, batch, config, losses, nullptr, coeff);
}

BatchLoss batch_loss(const ModelState& model, std::span<const Example* const> batch,
                     const TrainConfig& config) {
  std::vector<Instance> instances;
  instances.reserve(batch.size());
  for (const Example* ex : batch) instances.push_back(make_instance(model, *ex, config));
  return batch_loss(model, std::span<const Instance>(instances), config);
}

Gradient batch_gradient(const ModelState& model, std::span<const Instance> batch,
                        const TrainConfig& config) {
  std::vector<double> losses;
  std::vector<double> coeff;
  std::vector<std::vector<double>> dzs;
  evaluate_batch(model, 1.0, batch, config, losses, &dzs, coeff);
  const std::size_t c = model.classes.size();
  Gradient g;
  g.weights.assign(model.weights.size(), 0.0);
  g.bias.assign(c, 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (coeff[i] == 0.0) continue;
    for (std::size_t k = 0; k < c; ++k) g.bias[k] += coeff[i] * dzs[i][k];
    for (std::uint32_t j : batch[i].features) {
      double* row = g.weights.data() + static_cast<std::size_t>(j) * c;
      for (std::size_t k = 0; k < c; ++k) row[k] += coeff[i] * dzs[i][k];
    }
  }
  return g;
}

std::vector<std::uint32_t> predict_classes(const ModelState& model, const FeatureVector& features) {
  std::vector<double> z;
  compute_logits(model, 1.0, features, z);
  if (model.kind == TaskKind::single_label) {
    const auto best = std::max_element(z.begin(), z.end());  // first maximum
    return {static_cast<std::uint32_t>(best - z.begin())};
  }
  std::vector<std::uint32_t> out;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k] > 0.0) out.push_back(static_cast<std::uint32_t>(k));
  }
  return out;
}

std::vector<std::string> predict(const ModelState& model, const Example& example) {
  std::vector<std::string> out;
  for (std::uint32_t k : predict_classes(model, featurize(example.tokens, model.features))) {
    out.push_back(model.classes[k]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool exact_match(const ModelState& model, const Example& example) {
  return predict(model, example) == example.output.symbols;
}

namespace {

bool instance_correct(const ModelState& model, double scale, const Instance& inst,
                      const Example& ex, std::vector<double>& z) {
  compute_logits(model, scale, inst.features, z);
  if (model.kind == TaskKind::single_label) {
    const auto best = static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin());
    return best + 1 != model.classes.size() && model.classes[best] == ex.output.label;
  }
  std::vector<std::string> predicted;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k] > 0.0) predicted.push_back(model.classes[k]);
  }
  std::sort(predicted.begin(), predicted.end());
  return predicted == ex.output.symbols;
}

}  // namespace

ModelState train(const Corpus& corpus, const Split& split, const IndexList& dev,
                 const TrainConfig& config, const FeatureConfig& features) {
  config.validate();
  features.validate();
  if (split.entries.empty()) throw Error("train: empty training split");
  if (dev.empty()) throw Error("train: empty dev set");

  std::set<std::string> inventory;
  for (const SplitEntry& e : split.entries) {
    for (const std::string& s : corpus[e.index].output.symbols) inventory.insert(s);
  }
  ModelState model =
      ModelState::zeros(corpus.task_kind(), features, {inventory.begin(), inventory.end()});
  const std::size_t c = model.classes.size();

  // Featurize each distinct example once.
  std::unordered_map<std::size_t, std::size_t> slot;
  std::vector<Instance> distinct;
  std::vector<std::size_t> entry_slot;
  entry_slot.reserve(split.entries.size());
  for (const SplitEntry& e : split.entries) {
    auto [it, inserted] = slot.emplace(e.index, distinct.size());
    if (inserted) distinct.push_back(make_instance(model, corpus[e.index], config));
    entry_slot.push_back(it->second);
  }
  std::vector<Instance> dev_instances(dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) {
    dev_instances[i].features = featurize(corpus[dev[i]].tokens, features);
  }

  // weights are stored divided by `scale` so L2 decay is O(1) per step.
  double scale = 1.0;
  auto fold_scale = [&model, &scale] {
    for (double& w : model.weights) w *= scale;
    scale = 1.0;
  };
  auto dev_accuracy = [&] {
    std::size_t correct = 0;
    std::vector<double> z;
    for (std::size_t i = 0; i < dev.size(); ++i) {
      if (instance_correct(model, scale, dev_instances[i], corpus[dev[i]], z)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dev.size());
  };

  Rng rng(derive_seed(config.seed, "train/shuffle"));
  std::vector<std::size_t> order(split.entries.size());
  std::iota(order.begin(), order.end(), 0);

  ModelState best = model;
  double best_acc = -1.0;
  std::vector<Instance> batch;
  std::vector<double> losses;
  std::vector<double> coeff;
  std::vector<std::vector<double>> dzs;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    const double lr = config.learning_rate / (1.0 + epoch);
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t p = start; p < end; ++p) batch.push_back(distinct[entry_slot[order[p]]]);
      try {
        evaluate_batch(model, scale, std::span<const Instance>(batch), config, losses, &dzs, coeff);
      } catch (const Error&) {
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                    std::to_string(batch_no + 1));
      }
      // Decay first, then apply the data gradient at the decayed scale.
      if (config.l2 > 0.0) {
        scale *= 1.0 - lr * config.l2;
        if (scale < 1e-6) fold_scale();
      }
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (coeff[i] == 0.0) continue;
        const double step = lr * coeff[i];
        for (std::size_t k = 0; k < c; ++k) model.bias[k] -= step * dzs[i][k];
        const double wstep = step / scale;
        for (std::uint32_t j : batch[i].features) {
          double* row = model.weights.data() + static_cast<std::size_t>(j) * c;
          for (std::size_t k = 0; k < c; ++k) row[k] -= wstep * dzs[i][k];
        }
      }
    }
    const double acc = dev_accuracy();
    if (acc > best_acc) {
      best_acc = acc;
      fold_scale();
      best = model;
    }
  }
  for (double w : best.weights) {
    if (!std::isfinite(w)) throw Error("train: non-finite parameters");
  }
  return best;
}

nlohmann::ordered_json to_json(const ModelState& model) {
  nlohmann::ordered_json j;
  j["format"] = "isl-model";
  j["version"] = 1;
  j["task_kind"] = std::string(to_string(model.kind));
  j["features"] = to_json(model.features);
  j["classes"] = model.classes;
  j["bias"] = model.bias;
  // Sparse rows: [bucket, [w_class0, w_class1, ...]] for non-zero buckets.
  auto rows = nlohmann::ordered_json::array();
  const std::size_t c = model.classes.size();
  for (std::size_t b = 0; b < model.features.hash_dim; ++b) {
    const double* row = model.weights.data() + b * c;
    if (std::all_of(row, row + c, [](double w) { return w == 0.0; })) continue;
    rows.push_back(nlohmann::ordered_json::array({b, std::vector<double>(row, row + c)}));
  }
  j["weights"] = std::move(rows);
  return j;
}

ModelState model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "isl-model") throw Error("not an isl model file");
  if (j.value("version", 0) != 1) throw Error("unsupported model version");
  ModelState m;
  m.kind = parse_task_kind(j.at("task_kind").get<std::string>());
  m.features = feature_config_from_json(j.at("features"));
  m.features.validate();
  m.classes = j.at("classes").get<std::vector<std::string>>();
  m.bias = j.at("bias").get<std::vector<double>>();
  const std::size_t c = m.classes.size();
  if (m.bias.size() != c) throw Error("model bias size does not match classes");
  m.weights.assign(m.features.hash_dim * c, 0.0);
  for (const auto& row : j.at("weights")) {
    const auto b = row.at(0).get<std::size_t>();
    const auto w = row.at(1).get<std::vector<double>>();
    if (b >= m.features.hash_dim || w.size() != c) throw Error("malformed model weight row");
    std::copy(w.begin(), w.end(), m.weights.begin() + static_cast<std::ptrdiff_t>(b * c));
  }
  return m;
}

nlohmann::ordered_json to_json(const TrainConfig& config) {
  nlohmann::ordered_json j;
  j["objective"] = config.objective == Objective::erm ? "erm" : "group_dro";
  j["grouping"] = config.grouping == Grouping::per_symbol ? "per_symbol" : "contains_symbol";
  j["new_symbol"] = config.new_symbol;
  j["learning_rate"] = config.learning_rate;
  j["epochs"] = config.epochs;
  j["batch_size"] = config.batch_size;
  j["seed"] = config.seed;
  j["l2"] = config.l2;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  const std::string objective = j.value("objective", std::string("erm"));
  if (objective == "erm") {
    c.objective = Objective::erm;
  } else if (objective == "group_dro" || objective == "dro") {
    c.objective = Objective::group_dro;
  } else {
    throw Error("unknown objective '" + objective + "'");
  }
  const std::string grouping = j.value("grouping", std::string("per_symbol"));
  if (grouping == "per_symbol") {
    c.grouping = Grouping::per_symbol;
  } else if (grouping == "contains_symbol") {
    c.grouping = Grouping::contains_symbol;
  } else {
    throw Error("unknown grouping '" + grouping + "'");
  }
  c.new_symbol = j.value("new_symbol", c.new_symbol);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.l2 = j.value("l2", c.l2);
  return c;
}

nlohmann::ordered_json to_json(const FeatureConfig& config) {
  nlohmann::ordered_json j;
  j["hash_dim"] = config.hash_dim;
  j["ngram_order"] = config.ngram_order;
  return j;
}

FeatureConfig feature_config_from_json(const nlohmann::json& j) {
  FeatureConfig c;
  c.hash_dim = j.value("hash_dim", c.hash_dim);
  c.ngram_order = j.value("ngram_order", c.ngram_order);
  c.validate();
  return c;
}

void save_model(const ModelState& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file '" + path.string() + "'");
  out << to_json(model).dump() << '\n';
}

ModelState load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path.string() + "'");
  return model_from_json(nlohmann::json::parse(in));
}

}  // namespace isl
