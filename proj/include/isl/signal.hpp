#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "isl/corpus.hpp"
#include "isl/splits.hpp"

namespace isl {

enum class TriggerOrigin { manual, mined };

struct TriggerSet {
  std::string symbol;
  std::vector<std::string> tokens;
  TriggerOrigin origin = TriggerOrigin::manual;

  bool operator==(const TriggerSet&) const = default;
};

/// The hand-picked trigger tables for the ten studied intents and functions.
const std::vector<TriggerSet>& bundled_trigger_sets();
std::optional<TriggerSet> find_trigger_set(const std::vector<TriggerSet>& sets,
                                           std::string_view symbol);

/// Accepts a single object or an array of objects.
std::vector<TriggerSet> trigger_sets_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const TriggerSet& set);

struct SignalReport {
  std::string symbol;
  std::size_t total = 0;
  std::size_t n_symbol = 0;
  std::size_t n_with_trigger = 0;
  std::size_t n_with_trigger_and_symbol = 0;
  std::optional<double> strength;  // undefined when no entry carries a trigger
  std::optional<double> coverage;  // undefined when no entry carries the symbol
  std::vector<std::string> diluting_ids;
};

/// All counts are over the training multiset: duplicates count each time.
SignalReport signal_report(const Corpus& corpus, const Split& split, const TriggerSet& triggers);

/// P(symbol in output | some trigger in input). Throws UndefinedStatistic
/// when no training entry contains a trigger.
double source_signal_strength(const Corpus& corpus, const Split& split, const TriggerSet& triggers);

/// Fraction of symbol entries whose input carries a trigger.
double trigger_coverage(const Corpus& corpus, const Split& split, const TriggerSet& triggers);

struct MinedToken {
  std::string token;
  double strength = 0.0;     // P(symbol | token in input)
  std::size_t count = 0;     // entries whose input contains the token
  std::size_t support = 0;   // symbol entries whose input contains the token
};

/// Tokens present in at least min_count symbol entries, ranked by strength,
/// then count (descending), then token. Separator tokens are skipped.
std::vector<MinedToken> mine_triggers(const Corpus& corpus, const Split& split,
                                      const std::string& symbol, std::size_t min_count,
                                      std::size_t top_k);

/// Ids of trigger-bearing entries whose output lacks the symbol, unique, in
/// split order.
std::vector<std::string> find_diluting(const Corpus& corpus, const Split& split,
                                       const TriggerSet& triggers);

struct DilutionOptions {
  bool allow_deficit = false;
  /// Thin diluting entries only until strength reaches this value instead of
  /// removing all of them.
  std::optional<double> target_strength;
};

/// Replaces diluting entries in place with pool examples carrying neither a
/// trigger nor the symbol. When the pool runs dry and deficit mode is on, the
/// remaining diluting entries are dropped and Split::deficit records how many.
Split remove_dilution(const Corpus& corpus, const Split& split, const TriggerSet& triggers,
                      const IndexList& backfill_pool, const DilutionOptions& options = {});

/// CSV row "symbol,N,strength,coverage,n_diluting"; undefined values empty.
std::string signal_csv_header();
std::string signal_csv_row(const SignalReport& report);

}  // namespace isl
