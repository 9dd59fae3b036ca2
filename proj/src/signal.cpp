#include "isl/signal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "isl/error.hpp"
#include "isl/random.hpp"

namespace isl {

const std::vector<TriggerSet>& bundled_trigger_sets() {
  static const std::vector<TriggerSet> sets = {
      {"email_query", {"emails", "inbox"}, TriggerOrigin::manual},
      {"email_querycontact", {"contact", "phone", "number"}, TriggerOrigin::manual},
      {"general_quirky", {"day", "today", "tell", "can"}, TriggerOrigin::manual},
      {"play_radio", {"channel", "radio", "fm", "point", "station", "tune"}, TriggerOrigin::manual},
      {"transport_traffic", {"traffic"}, TriggerOrigin::manual},
      {"FindManager", {"boss", "manager", "supervisor"}, TriggerOrigin::manual},
      {"PlaceHasFeature", {"takeout", "casual", "waiter"}, TriggerOrigin::manual},
      {"Tomorrow", {"tomorrow"}, TriggerOrigin::manual},
      {"FenceAttendee", {"meet", "mom"}, TriggerOrigin::manual},
      // "n't" is never produced by tokenize(); it only matches pre-tokenized text.
      {"DoNotConfirm", {"cancel", "n't", "no"}, TriggerOrigin::manual},
  };
  return sets;
}

std::optional<TriggerSet> find_trigger_set(const std::vector<TriggerSet>& sets,
                                           std::string_view symbol) {
  for (const TriggerSet& s : sets) {
    if (s.symbol == symbol) return s;
  }
  return std::nullopt;
}

std::vector<TriggerSet> trigger_sets_from_json(const nlohmann::json& j) {
  std::vector<TriggerSet> out;
  auto parse_one = [](const nlohmann::json& o) {
    TriggerSet s;
    s.symbol = o.at("symbol").get<std::string>();
    s.tokens = o.at("tokens").get<std::vector<std::string>>();
    const std::string origin = o.value("origin", std::string("manual"));
    if (origin == "manual") {
      s.origin = TriggerOrigin::manual;
    } else if (origin == "mined") {
      s.origin = TriggerOrigin::mined;
    } else {
      throw Error("trigger set origin must be manual|mined, got '" + origin + "'");
    }
    if (s.tokens.empty()) throw Error("trigger set for '" + s.symbol + "' is empty");
    for (std::string& t : s.tokens) {
      std::transform(t.begin(), t.end(), t.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }
    return s;
  };
  if (j.is_array()) {
    for (const auto& o : j) out.push_back(parse_one(o));
  } else {
    out.push_back(parse_one(j));
  }
  return out;
}

nlohmann::ordered_json to_json(const TriggerSet& set) {
  nlohmann::ordered_json j;
  j["symbol"] = set.symbol;
  j["tokens"] = set.tokens;
  j["origin"] = set.origin == TriggerOrigin::manual ? "manual" : "mined";
  return j;
}

SignalReport signal_report(const Corpus& corpus, const Split& split, const TriggerSet& triggers) {
  if (triggers.tokens.empty()) throw Error("signal_report: empty trigger set");
  SignalReport r;
  r.symbol = triggers.symbol;
  r.total = split.entries.size();
  std::set<std::size_t> diluting_seen;
  for (const SplitEntry& e : split.entries) {
    const Example& ex = corpus[e.index];
    const bool has_symbol = ex.output.contains(triggers.symbol);
    const bool has_trigger = contains_any(ex.tokens, triggers.tokens);
    if (has_symbol) ++r.n_symbol;
    if (has_trigger) {
      ++r.n_with_trigger;
      if (has_symbol) {
        ++r.n_with_trigger_and_symbol;
      } else if (diluting_seen.insert(e.index).second) {
        r.diluting_ids.push_back(ex.id);
      }
    }
  }
  if (r.n_with_trigger > 0) {
    r.strength = static_cast<double>(r.n_with_trigger_and_symbol) / static_cast<double>(r.n_with_trigger);
  }
  if (r.n_symbol > 0) {
    r.coverage = static_cast<double>(r.n_with_trigger_and_symbol) / static_cast<double>(r.n_symbol);
  }
  return r;
}

double source_signal_strength(const Corpus& corpus, const Split& split, const TriggerSet& triggers) {
  const SignalReport r = signal_report(corpus, split, triggers);
  if (!r.strength) {
    throw UndefinedStatistic("source signal strength of '" + triggers.symbol +
                             "' undefined: no training example contains a trigger");
  }
  return *r.strength;
}

double trigger_coverage(const Corpus& corpus, const Split& split, const TriggerSet& triggers) {
  const SignalReport r = signal_report(corpus, split, triggers);
  if (!r.coverage) {
    throw UndefinedStatistic("trigger coverage of '" + triggers.symbol +
                             "' undefined: split has no examples of the symbol");
  }
  return *r.coverage;
}

std::vector<MinedToken> mine_triggers(const Corpus& corpus, const Split& split,
                                      const std::string& symbol, std::size_t min_count,
                                      std::size_t top_k) {
  struct Tally {
    std::size_t count = 0;
    std::size_t support = 0;
  };
  std::map<std::string, Tally> tallies;
  std::size_t n_symbol = 0;
  for (const SplitEntry& e : split.entries) {
    const Example& ex = corpus[e.index];
    const bool has_symbol = ex.output.contains(symbol);
    if (has_symbol) ++n_symbol;
    std::set<std::string_view> distinct(ex.tokens.begin(), ex.tokens.end());
    for (std::string_view tok : distinct) {
      if (tok == kSeparatorToken) continue;
      Tally& t = tallies[std::string(tok)];
      ++t.count;
      if (has_symbol) ++t.support;
    }
  }
  if (n_symbol == 0) throw Error("mine_triggers: split has no examples of '" + symbol + "'");

  std::vector<MinedToken> ranked;
  for (const auto& [tok, t] : tallies) {
    if (t.support == 0 || t.support < min_count) continue;
    ranked.push_back({tok, static_cast<double>(t.support) / static_cast<double>(t.count), t.count,
                      t.support});
  }
  std::sort(ranked.begin(), ranked.end(), [](const MinedToken& a, const MinedToken& b) {
    if (a.strength != b.strength) return a.strength > b.strength;
    if (a.count != b.count) return a.count > b.count;
    return a.token < b.token;
  });
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

std::vector<std::string> find_diluting(const Corpus& corpus, const Split& split,
                                       const TriggerSet& triggers) {
  return signal_report(corpus, split, triggers).diluting_ids;
}

Split remove_dilution(const Corpus& corpus, const Split& split, const TriggerSet& triggers,
                      const IndexList& backfill_pool, const DilutionOptions& options) {
  if (triggers.tokens.empty()) throw Error("remove_dilution: empty trigger set");
  const std::string& symbol = triggers.symbol;

  std::vector<std::size_t> diluting_pos;
  std::size_t n_trigger_symbol = 0;
  std::unordered_set<std::size_t> in_split;
  for (std::size_t p = 0; p < split.entries.size(); ++p) {
    const std::size_t idx = split.entries[p].index;
    in_split.insert(idx);
    const Example& ex = corpus[idx];
    if (!contains_any(ex.tokens, triggers.tokens)) continue;
    if (ex.output.contains(symbol)) {
      ++n_trigger_symbol;
    } else {
      diluting_pos.push_back(p);
    }
  }
  if (diluting_pos.empty()) return split;

  Rng rng(derive_seed(split.spec.seed, "dilution/" + symbol));
  if (options.target_strength) {
    const double target = *options.target_strength;
    if (!(target > 0.0) || target > 1.0) throw Error("remove_dilution: target strength outside (0, 1]");
    // Largest number of diluting entries that keeps strength >= target.
    auto keep = static_cast<std::size_t>(
        std::floor(static_cast<double>(n_trigger_symbol) * (1.0 - target) / target));
    while (keep > 0 && static_cast<double>(n_trigger_symbol) /
                               static_cast<double>(n_trigger_symbol + keep) < target) {
      --keep;
    }
    if (keep >= diluting_pos.size()) return split;
    rng.shuffle(std::span<std::size_t>(diluting_pos));
    diluting_pos.resize(diluting_pos.size() - keep);
    std::sort(diluting_pos.begin(), diluting_pos.end());
  }

  IndexList eligible;
  for (std::size_t idx : backfill_pool) {
    if (in_split.count(idx) != 0) {
      throw Error("remove_dilution: backfill pool overlaps the split (id '" + corpus[idx].id + "')");
    }
    const Example& ex = corpus[idx];
    if (!ex.output.contains(symbol) && !contains_any(ex.tokens, triggers.tokens)) {
      eligible.push_back(idx);
    }
  }
  if (eligible.size() < diluting_pos.size() && !options.allow_deficit) {
    throw Error("remove_dilution: backfill pool has " + std::to_string(eligible.size()) +
                " eligible examples, need " + std::to_string(diluting_pos.size()));
  }
  Rng(derive_seed(split.spec.seed, "backfill/" + symbol)).shuffle(std::span<std::size_t>(eligible));

  Split out = split;
  std::vector<bool> drop(out.entries.size(), false);
  for (std::size_t i = 0; i < diluting_pos.size(); ++i) {
    if (i < eligible.size()) {
      out.entries[diluting_pos[i]] = {eligible[i], Origin::backfill, 0};
    } else {
      drop[diluting_pos[i]] = true;
      ++out.deficit;
    }
  }
  if (out.deficit > 0) {
    std::vector<SplitEntry> kept;
    kept.reserve(out.entries.size() - out.deficit);
    for (std::size_t p = 0; p < out.entries.size(); ++p) {
      if (!drop[p]) kept.push_back(out.entries[p]);
    }
    out.entries = std::move(kept);
  }
  return out;
}

std::string signal_csv_header() { return "symbol,N,strength,coverage,n_diluting"; }

std::string signal_csv_row(const SignalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.symbol << ',' << r.total << ',';
  if (r.strength) os << *r.strength;
  os << ',';
  if (r.coverage) os << *r.coverage;
  os << ',' << r.diluting_ids.size();
  return os.str();
}

}  // namespace isl
