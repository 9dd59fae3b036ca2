#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "isl/corpus.hpp"
#include "isl/signal.hpp"
#include "isl/splits.hpp"
#include "isl/trainer.hpp"

namespace isl {

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Percentile bootstrap over the mean of `correct`: B seeded resamples with
/// replacement, endpoints at the (1-level)/2 and 1-(1-level)/2 quantiles
/// (linear interpolation between order statistics).
Interval bootstrap_ci(std::span<const std::uint8_t> correct, std::size_t resamples, double level,
                      std::uint64_t seed);

struct BootstrapConfig {
  std::size_t resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

struct MetricReport {
  std::string new_symbol;
  double overall_acc = 0.0;
  std::size_t n_overall = 0;
  std::map<std::string, double> per_symbol_acc;
  std::map<std::string, std::size_t> per_symbol_n;
  std::optional<double> new_symbol_acc;         // null when the symbol is absent from the test set
  std::size_t n_new_symbol = 0;
  std::optional<double> new_symbol_presence_recall;  // symbol-set tasks only
  std::optional<double> competing_acc;          // null without triggers or competing examples
  std::size_t n_competing = 0;
  std::map<std::string, Interval> ci;           // keys: overall, new_symbol, competing
  std::string seed_set;
};

/// Test examples with a trigger in the input and the symbol absent from the
/// gold output. Ids in test order.
std::vector<std::string> competing_subset(const Corpus& corpus, const IndexList& test,
                                          const TriggerSet& triggers);

/// Exact-match accuracy overall, per gold symbol, on the new symbol and on
/// the competing subset, each with a bootstrap interval.
MetricReport evaluate(const ModelState& model, const Corpus& corpus, const IndexList& test,
                      const std::string& new_symbol, const std::optional<TriggerSet>& triggers,
                      const BootstrapConfig& bootstrap = {});

nlohmann::ordered_json to_json(const MetricReport& report);

}  // namespace isl
