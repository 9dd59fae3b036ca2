#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "isl/corpus.hpp"
#include "isl/splits.hpp"

namespace isl {

struct FeatureConfig {
  std::size_t hash_dim = std::size_t{1} << 18;  // power of two
  int ngram_order = 1;                          // 1 or 2

  void validate() const;
  bool operator==(const FeatureConfig&) const = default;
};

/// Sorted, unique active buckets of hashed unigrams (and bigrams when
/// ngram_order == 2). Collisions collapse to a single active coordinate.
using FeatureVector = std::vector<std::uint32_t>;
FeatureVector featurize(const Tokens& tokens, const FeatureConfig& config);

enum class Objective { erm, group_dro };
enum class Grouping { per_symbol, contains_symbol };

struct TrainConfig {
  Objective objective = Objective::erm;
  Grouping grouping = Grouping::per_symbol;
  std::string new_symbol;  // required for contains_symbol grouping
  double learning_rate = 0.5;
  int epochs = 10;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double l2 = 1e-6;

  void validate() const;
};

/// Gold label slot for symbols never seen in training (single-label only).
inline constexpr std::string_view kOtherClass = "<other>";

/// Linear model over hashed binary features. Single-label models use one
/// softmax over `classes` (the last class is kOtherClass); symbol-set models
/// use an independent sigmoid head per class.
struct ModelState {
  TaskKind kind = TaskKind::single_label;
  FeatureConfig features;
  std::vector<std::string> classes;
  std::vector<double> weights;  // hash_dim x classes, bucket-major
  std::vector<double> bias;

  static ModelState zeros(TaskKind kind, const FeatureConfig& features,
                          std::vector<std::string> symbols);

  std::size_t num_classes() const noexcept { return classes.size(); }
  std::optional<std::uint32_t> class_index(std::string_view symbol) const;
  double& weight(std::uint32_t bucket, std::uint32_t cls) {
    return weights[static_cast<std::size_t>(bucket) * classes.size() + cls];
  }
  double weight(std::uint32_t bucket, std::uint32_t cls) const {
    return weights[static_cast<std::size_t>(bucket) * classes.size() + cls];
  }

  bool operator==(const ModelState&) const = default;
};

/// A featurized training or evaluation example.
struct Instance {
  FeatureVector features;
  std::vector<std::uint32_t> labels;  // one class for single-label
  std::uint32_t group = 0;
};

Instance make_instance(const ModelState& model, const Example& example, const TrainConfig& config);

std::vector<double> logits(const ModelState& model, const FeatureVector& features);

struct BatchLoss {
  double loss = 0.0;
  std::map<std::uint32_t, double> group_means;
  std::map<std::uint32_t, std::size_t> group_sizes;
  std::uint32_t worst_group = 0;  // argmax of group_means, lowest index on ties
};

/// ERM: mean per-example loss. Group DRO: the largest per-group mean among
/// groups present in the batch. Single-label loss is softmax cross-entropy;
/// symbol-set loss sums the per-symbol binary cross-entropies. L2 is not
/// part of this quantity. Throws on an empty batch or a non-finite loss.
BatchLoss batch_loss(const ModelState& model, std::span<const Instance> batch,
                     const TrainConfig& config);
BatchLoss batch_loss(const ModelState& model, std::span<const Example* const> batch,
                     const TrainConfig& config);

struct Gradient {
  std::vector<double> weights;  // same layout as ModelState::weights
  std::vector<double> bias;
};

/// Gradient of batch_loss. For DRO this is the ERM gradient of the worst
/// group's examples alone.
Gradient batch_gradient(const ModelState& model, std::span<const Instance> batch,
                        const TrainConfig& config);

/// Minibatch SGD with per-epoch learning rate lr/(1+epoch) and L2 decay.
/// Returns the parameters of the epoch with the best dev accuracy (earliest
/// on ties). Deterministic given its inputs.
ModelState train(const Corpus& corpus, const Split& split, const IndexList& dev,
                 const TrainConfig& config, const FeatureConfig& features);

/// Predicted symbols: argmax class (lowest index on ties) for single-label,
/// every class with a positive logit for symbol-set. Sorted.
std::vector<std::string> predict(const ModelState& model, const Example& example);
std::vector<std::uint32_t> predict_classes(const ModelState& model, const FeatureVector& features);

/// True when the prediction equals the gold output exactly.
bool exact_match(const ModelState& model, const Example& example);

nlohmann::ordered_json to_json(const ModelState& model);
ModelState model_from_json(const nlohmann::json& j);
void save_model(const ModelState& model, const std::filesystem::path& path);
ModelState load_model(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const FeatureConfig& config);
FeatureConfig feature_config_from_json(const nlohmann::json& j);

}  // namespace isl
