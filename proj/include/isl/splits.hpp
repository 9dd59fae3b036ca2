#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "isl/corpus.hpp"

namespace isl {

/// Indices into a Corpus.
using IndexList = std::vector<std::size_t>;

struct EvalCarve {
  IndexList train_pool;
  IndexList dev;
  IndexList test;
  std::vector<std::string> warnings;
};

/// Stratified by symbol (intent label, or the full symbol-set signature for
/// programs). Strata with fewer than 3 examples are pooled and carved
/// unstratified. All three lists come back in corpus order.
EvalCarve carve_eval(const Corpus& corpus, double dev_fraction, double test_fraction,
                     std::uint64_t seed);

struct SplitSpec {
  std::string new_symbol;
  std::size_t k = 0;
  std::size_t total = 0;  // N
  std::uint64_t seed = 0;
  std::string source;

  bool operator==(const SplitSpec&) const = default;
};

enum class Origin { original, duplicate, backfill };

struct SplitEntry {
  std::size_t index = 0;
  Origin origin = Origin::original;
  std::size_t copy = 0;  // duplicate number, 1-based; 0 otherwise

  bool operator==(const SplitEntry&) const = default;
};

struct Split {
  SplitSpec spec;
  std::vector<SplitEntry> entries;  // training multiset, in order
  std::size_t deficit = 0;          // entries lost to an exhausted backfill pool

  std::size_t size() const noexcept { return entries.size(); }
  bool operator==(const Split&) const = default;
};

struct SplitStats {
  std::size_t symbol_count = 0;  // count(ŷ), with multiplicity
  std::size_t total = 0;         // N, with multiplicity
  double imbalance = 0.0;        // count(ŷ) / N
};

SplitStats split_stats(const Corpus& corpus, const Split& split);

/// Number of pool examples lacking the symbol, plus k.
std::size_t max_setting_size(const Corpus& corpus, const IndexList& pool,
                             const std::string& symbol, std::size_t k);

/// Samples k symbol examples and N-k others without replacement. Both draws
/// are prefixes of seeded permutations that depend only on (pool, symbol,
/// seed), so splits at growing N are nested.
Split make_split(const Corpus& corpus, const IndexList& pool, const SplitSpec& spec);

std::string provenance_tag(const SplitEntry& entry);

nlohmann::ordered_json to_json(const Corpus& corpus, const Split& split);
Split split_from_json(const Corpus& corpus, const nlohmann::json& j);

nlohmann::ordered_json to_json(const Corpus& corpus, const EvalCarve& carve);
EvalCarve carve_from_json(const Corpus& corpus, const nlohmann::json& j);

}  // namespace isl
