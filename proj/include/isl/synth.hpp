#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "isl/corpus.hpp"

namespace isl {

struct SynthSymbol {
  std::string name;
  std::vector<std::string> triggers;
  double p_trig = 1.0;   // P(positive example carries one of its own triggers)
  double p_cross = 0.0;  // P(example of another symbol carries one of these triggers)
  int min_length = 5;
  int max_length = 12;
};

struct SynthSpec {
  std::vector<SynthSymbol> symbols;
  std::size_t vocab_size = 1000;
  double zipf_exponent = 1.0;
  /// Share of background tokens drawn from the symbol's own ranking of the
  /// vocabulary instead of the shared one. This is the non-trigger signal.
  double topic_share = 0.25;
  std::uint64_t seed = 0;

  const SynthSymbol& symbol(std::string_view name) const;
  void validate() const;
};

/// Background tokens are "w0".."w{V-1}", drawn from a Zipf law over rank.
/// Each symbol also has its own permutation of the ranks, used for a
/// topic_share fraction of its background tokens.
/// Trigger injection overwrites distinct background positions; if an
/// utterance runs out of free positions the trigger is appended.
///
/// Each symbol draws from its own stream, so the examples of one symbol do
/// not depend on the counts requested for the others.
Corpus generate_corpus(const SynthSpec& spec, const std::map<std::string, std::size_t>& n_per_symbol);

/// k*p_trig / (k*p_trig + (N-k)*p_cross) for the given new symbol.
double expected_strength(const SynthSpec& spec, std::string_view symbol, std::size_t total,
                         std::size_t new_count);
double expected_strength(double p_trig, double p_cross, std::size_t total, std::size_t new_count);

SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SynthSpec& spec);

}  // namespace isl
