#include "isl/eval.hpp"

#include <algorithm>
#include <cmath>

#include "isl/error.hpp"
#include "isl/random.hpp"

namespace isl {

Interval bootstrap_ci(std::span<const std::uint8_t> correct, std::size_t resamples, double level,
                      std::uint64_t seed) {
  if (correct.empty()) throw Error("bootstrap_ci: empty vector");
  if (resamples < 100) throw Error("bootstrap_ci: need at least 100 resamples");
  if (!(level > 0.0 && level < 1.0)) throw Error("bootstrap_ci: level must be in (0, 1)");
  const std::size_t n = correct.size();
  Rng rng(derive_seed(seed, "bootstrap"));
  std::vector<double> means(resamples);
  for (double& m : means) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += correct[rng.below(n)] != 0 ? 1 : 0;
    m = static_cast<double>(hits) / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  auto quantile = [&means](double q) {
    const double h = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    const double frac = h - static_cast<double>(lo);
    if (frac == 0.0 || means[lo] == means[hi]) return means[lo];
    return means[lo] + frac * (means[hi] - means[lo]);
  };
  const double alpha = 1.0 - level;
  return {quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)};
}

std::vector<std::string> competing_subset(const Corpus& corpus, const IndexList& test,
                                          const TriggerSet& triggers) {
  if (triggers.tokens.empty()) throw Error("competing_subset: empty trigger set");
  std::vector<std::string> ids;
  for (std::size_t i : test) {
    const Example& ex = corpus[i];
    if (!ex.output.contains(triggers.symbol) && contains_any(ex.tokens, triggers.tokens)) {
      ids.push_back(ex.id);
    }
  }
  return ids;
}

namespace {

double mean_of(const std::vector<std::uint8_t>& v) {
  std::size_t hits = 0;
  for (auto b : v) hits += b;
  return static_cast<double>(hits) / static_cast<double>(v.size());
}

}  // namespace

MetricReport evaluate(const ModelState& model, const Corpus& corpus, const IndexList& test,
                      const std::string& new_symbol, const std::optional<TriggerSet>& triggers,
                      const BootstrapConfig& bootstrap) {
  if (test.empty()) throw Error("evaluate: empty test set");
  MetricReport r;
  r.new_symbol = new_symbol;
  r.seed_set = std::to_string(bootstrap.seed);

  std::vector<std::uint8_t> overall;
  std::vector<std::uint8_t> on_new;
  std::vector<std::uint8_t> on_competing;
  std::map<std::string, std::size_t> per_symbol_hits;
  std::size_t presence_hits = 0;

  for (std::size_t i : test) {
    const Example& ex = corpus[i];
    const std::vector<std::string> predicted = predict(model, ex);
    const bool correct = predicted == ex.output.symbols;
    overall.push_back(correct ? 1 : 0);
    for (const std::string& s : ex.output.symbols) {
      ++r.per_symbol_n[s];
      if (correct) ++per_symbol_hits[s];
    }
    const bool has_new = ex.output.contains(new_symbol);
    if (has_new) {
      on_new.push_back(correct ? 1 : 0);
      if (std::binary_search(predicted.begin(), predicted.end(), new_symbol)) ++presence_hits;
    } else if (triggers && contains_any(ex.tokens, triggers->tokens)) {
      on_competing.push_back(correct ? 1 : 0);
    }
  }

  r.n_overall = overall.size();
  r.overall_acc = mean_of(overall);
  r.ci["overall"] = bootstrap_ci(overall, bootstrap.resamples, bootstrap.level,
                                 derive_seed(bootstrap.seed, "overall"));
  for (const auto& [s, n] : r.per_symbol_n) {
    r.per_symbol_acc[s] = static_cast<double>(per_symbol_hits[s]) / static_cast<double>(n);
  }
  r.n_new_symbol = on_new.size();
  if (!on_new.empty()) {
    r.new_symbol_acc = mean_of(on_new);
    r.ci["new_symbol"] = bootstrap_ci(on_new, bootstrap.resamples, bootstrap.level,
                                      derive_seed(bootstrap.seed, "new_symbol"));
    if (corpus.task_kind() == TaskKind::symbol_set) {
      r.new_symbol_presence_recall =
          static_cast<double>(presence_hits) / static_cast<double>(on_new.size());
    }
  }
  r.n_competing = on_competing.size();
  if (!on_competing.empty()) {
    r.competing_acc = mean_of(on_competing);
    r.ci["competing"] = bootstrap_ci(on_competing, bootstrap.resamples, bootstrap.level,
                                     derive_seed(bootstrap.seed, "competing"));
  }
  return r;
}

nlohmann::ordered_json to_json(const MetricReport& r) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["new_symbol"] = r.new_symbol;
  j["overall_acc"] = r.overall_acc;
  j["n_overall"] = r.n_overall;
  j["new_symbol_acc"] = opt(r.new_symbol_acc);
  j["n_new_symbol"] = r.n_new_symbol;
  j["new_symbol_presence_recall"] = opt(r.new_symbol_presence_recall);
  j["competing_acc"] = opt(r.competing_acc);
  j["n_competing"] = r.n_competing;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [s, acc] : r.per_symbol_acc) {
    per[s] = {{"acc", acc}, {"n", r.per_symbol_n.at(s)}};
  }
  j["per_symbol"] = std::move(per);
  nlohmann::ordered_json ci = nlohmann::ordered_json::object();
  for (const auto& [k, iv] : r.ci) ci[k] = {iv.low, iv.high};
  j["ci"] = std::move(ci);
  j["seed_set"] = r.seed_set;
  return j;
}

}  // namespace isl
