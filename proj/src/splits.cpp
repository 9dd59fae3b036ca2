#include "isl/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "isl/error.hpp"
#include "isl/random.hpp"

namespace isl {

namespace {

std::string stratum_key(const Example& ex) {
  if (ex.output.kind == TaskKind::single_label) return ex.output.label;
  std::string key;
  for (const std::string& s : ex.output.symbols) {
    key += s;
    key += ' ';
  }
  return key;
}

void allocate(IndexList members, double dev_fraction, double test_fraction, Rng rng,
              EvalCarve& out) {
  const std::size_t n = members.size();
  auto n_dev = static_cast<std::size_t>(std::lround(static_cast<double>(n) * dev_fraction));
  auto n_test = static_cast<std::size_t>(std::lround(static_cast<double>(n) * test_fraction));
  n_dev = std::min(n_dev, n);
  n_test = std::min(n_test, n - n_dev);
  rng.shuffle(std::span<std::size_t>(members));
  out.dev.insert(out.dev.end(), members.begin(), members.begin() + n_dev);
  out.test.insert(out.test.end(), members.begin() + n_dev, members.begin() + n_dev + n_test);
  out.train_pool.insert(out.train_pool.end(), members.begin() + n_dev + n_test, members.end());
}

}  // namespace

EvalCarve carve_eval(const Corpus& corpus, double dev_fraction, double test_fraction,
                     std::uint64_t seed) {
  if (!(dev_fraction > 0.0) || !(test_fraction > 0.0) || dev_fraction + test_fraction >= 1.0) {
    throw Error("carve_eval: fractions must be positive and sum to less than 1");
  }
  std::map<std::string, IndexList> strata;
  for (std::size_t i = 0; i < corpus.size(); ++i) strata[stratum_key(corpus[i])].push_back(i);

  EvalCarve out;
  IndexList pooled;
  std::size_t n_small = 0;
  for (auto& [key, members] : strata) {
    if (members.size() < 3) {
      pooled.insert(pooled.end(), members.begin(), members.end());
      ++n_small;
      continue;
    }
    allocate(std::move(members), dev_fraction, test_fraction,
             Rng(derive_seed(seed, "carve/" + key)), out);
  }
  if (!pooled.empty()) {
    std::sort(pooled.begin(), pooled.end());
    out.warnings.push_back(std::to_string(n_small) +
                           " symbol stratum(s) with fewer than 3 examples carved unstratified");
    allocate(std::move(pooled), dev_fraction, test_fraction, Rng(derive_seed(seed, "carve/<pooled>")),
             out);
  }
  std::sort(out.train_pool.begin(), out.train_pool.end());
  std::sort(out.dev.begin(), out.dev.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitStats split_stats(const Corpus& corpus, const Split& split) {
  SplitStats s;
  s.total = split.entries.size();
  for (const SplitEntry& e : split.entries) {
    if (corpus[e.index].output.contains(split.spec.new_symbol)) ++s.symbol_count;
  }
  s.imbalance = s.total == 0 ? 0.0 : static_cast<double>(s.symbol_count) / static_cast<double>(s.total);
  return s;
}

std::size_t max_setting_size(const Corpus& corpus, const IndexList& pool, const std::string& symbol,
                             std::size_t k) {
  if (pool.empty()) throw Error("max_setting_size: empty pool");
  std::size_t with = 0;
  for (std::size_t i : pool) {
    if (corpus[i].output.contains(symbol)) ++with;
  }
  if (with < k) {
    throw Error("max_setting_size: pool has " + std::to_string(with) + " examples of '" + symbol +
                "', fewer than k=" + std::to_string(k));
  }
  return pool.size() - with + k;
}

Split make_split(const Corpus& corpus, const IndexList& pool, const SplitSpec& spec) {
  if (spec.k == 0) throw Error("make_split: k must be positive");
  if (spec.k > spec.total) throw Error("make_split: k exceeds N");
  const std::size_t bound = max_setting_size(corpus, pool, spec.new_symbol, spec.k);
  if (spec.total > bound) {
    throw Error("make_split: N=" + std::to_string(spec.total) + " exceeds max_setting_size=" +
                std::to_string(bound) + " for '" + spec.new_symbol + "'");
  }
  IndexList with;
  IndexList without;
  for (std::size_t i : pool) {
    (corpus[i].output.contains(spec.new_symbol) ? with : without).push_back(i);
  }
  Rng(derive_seed(spec.seed, "split/with/" + spec.new_symbol)).shuffle(std::span<std::size_t>(with));
  Rng(derive_seed(spec.seed, "split/without/" + spec.new_symbol))
      .shuffle(std::span<std::size_t>(without));

  Split split;
  split.spec = spec;
  split.entries.reserve(spec.total);
  for (std::size_t i = 0; i < spec.k; ++i) split.entries.push_back({with[i], Origin::original, 0});
  for (std::size_t i = 0; i < spec.total - spec.k; ++i) {
    split.entries.push_back({without[i], Origin::original, 0});
  }
  return split;
}

std::string provenance_tag(const SplitEntry& entry) {
  switch (entry.origin) {
    case Origin::original:
      return "original";
    case Origin::duplicate:
      return "duplicate#" + std::to_string(entry.copy);
    case Origin::backfill:
      return "backfill";
  }
  return "original";
}

namespace {

SplitEntry parse_tag(std::size_t index, const std::string& tag) {
  if (tag == "original") return {index, Origin::original, 0};
  if (tag == "backfill") return {index, Origin::backfill, 0};
  const std::string prefix = "duplicate#";
  if (tag.rfind(prefix, 0) == 0) {
    return {index, Origin::duplicate, static_cast<std::size_t>(std::stoul(tag.substr(prefix.size())))};
  }
  throw Error("unknown provenance tag '" + tag + "'");
}

}  // namespace

nlohmann::ordered_json to_json(const Corpus& corpus, const Split& split) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json spec;
  spec["new_symbol"] = split.spec.new_symbol;
  spec["k"] = split.spec.k;
  spec["N"] = split.spec.total;
  spec["seed"] = split.spec.seed;
  spec["source"] = split.spec.source;
  j["spec"] = std::move(spec);
  auto ids = nlohmann::ordered_json::array();
  auto tags = nlohmann::ordered_json::array();
  for (const SplitEntry& e : split.entries) {
    ids.push_back(corpus[e.index].id);
    tags.push_back(provenance_tag(e));
  }
  j["train_ids"] = std::move(ids);
  j["provenance"] = std::move(tags);
  j["deficit"] = split.deficit;
  const SplitStats stats = split_stats(corpus, split);
  j["stats"] = {{"count", stats.symbol_count}, {"N", stats.total}, {"imbalance", stats.imbalance}};
  return j;
}

Split split_from_json(const Corpus& corpus, const nlohmann::json& j) {
  Split split;
  const auto& spec = j.at("spec");
  split.spec.new_symbol = spec.at("new_symbol").get<std::string>();
  split.spec.k = spec.at("k").get<std::size_t>();
  split.spec.total = spec.at("N").get<std::size_t>();
  split.spec.seed = spec.at("seed").get<std::uint64_t>();
  split.spec.source = spec.value("source", std::string());
  const auto& ids = j.at("train_ids");
  const auto& tags = j.at("provenance");
  if (ids.size() != tags.size()) throw Error("split: train_ids and provenance differ in length");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    split.entries.push_back(
        parse_tag(corpus.index_of(ids[i].get<std::string>()), tags[i].get<std::string>()));
  }
  split.deficit = j.value("deficit", std::size_t{0});
  return split;
}

namespace {

nlohmann::ordered_json id_array(const Corpus& corpus, const IndexList& list) {
  auto a = nlohmann::ordered_json::array();
  for (std::size_t i : list) a.push_back(corpus[i].id);
  return a;
}

IndexList index_array(const Corpus& corpus, const nlohmann::json& a) {
  IndexList out;
  out.reserve(a.size());
  for (const auto& id : a) out.push_back(corpus.index_of(id.get<std::string>()));
  return out;
}

}  // namespace

nlohmann::ordered_json to_json(const Corpus& corpus, const EvalCarve& carve) {
  nlohmann::ordered_json j;
  j["train_pool"] = id_array(corpus, carve.train_pool);
  j["dev"] = id_array(corpus, carve.dev);
  j["test"] = id_array(corpus, carve.test);
  return j;
}

EvalCarve carve_from_json(const Corpus& corpus, const nlohmann::json& j) {
  EvalCarve c;
  c.train_pool = index_array(corpus, j.at("train_pool"));
  c.dev = index_array(corpus, j.at("dev"));
  c.test = index_array(corpus, j.at("test"));
  return c;
}

}  // namespace isl
