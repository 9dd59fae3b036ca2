#pragma once
// Shared fixtures and brute-force reference implementations for the tests.
// The oracles deliberately avoid the library's helpers (contains_any,
// Output::contains, inventories) so they check the real code independently.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "isl/corpus.hpp"
#include "isl/signal.hpp"
#include "isl/splits.hpp"
#include "isl/trainer.hpp"

namespace isl::test {

/// The six-example running corpus C0, with intent labels.
inline Corpus c0() {
  std::vector<Example> ex;
  auto add = [&ex](const char* id, const char* utt, const char* label) {
    ex.push_back(make_example(id, {}, utt, Output::intent(label)));
  };
  add("e1", "who is my manager", "FindManager");
  add("e2", "what does my boss do", "FindManager");
  add("e3", "invite my manager s wife", "CreateEvent");
  add("e4", "schedule lunch tomorrow", "Tomorrow");
  add("e5", "play some music", "PlayMusic");
  add("e6", "email my supervisor", "SendEmail");
  return Corpus(std::move(ex), TaskKind::single_label);
}

/// C0 followed by the backfill candidates e7 and e8.
inline Corpus c0_with_pool() {
  std::vector<Example> ex = c0().examples();
  ex.push_back(make_example("e7", {}, "send a note to dad", Output::intent("SendEmail")));
  ex.push_back(make_example("e8", {}, "book a table", Output::intent("Restaurant")));
  return Corpus(std::move(ex), TaskKind::single_label);
}

inline const TriggerSet kManagerTriggers{"FindManager", {"manager", "boss", "supervisor"},
                                         TriggerOrigin::manual};

inline Split whole_split(const Corpus& c, const std::string& symbol) {
  Split s;
  s.spec.new_symbol = symbol;
  s.spec.total = c.size();
  for (std::size_t i = 0; i < c.size(); ++i) s.entries.push_back({i, Origin::original, 0});
  for (const SplitEntry& e : s.entries) {
    if (std::find(c[e.index].output.symbols.begin(), c[e.index].output.symbols.end(), symbol) !=
        c[e.index].output.symbols.end()) {
      ++s.spec.k;
    }
  }
  return s;
}

inline IndexList all_indices(const Corpus& c) {
  IndexList out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = i;
  return out;
}

/// Random corpus over a tiny vocabulary so triggers and symbols collide often.
inline Corpus random_corpus(std::mt19937_64& gen, TaskKind kind, std::size_t max_size = 200) {
  const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g", "h", "radio", "boss"};
  const std::vector<std::string> labels = {"A", "B", "C", "D"};
  std::uniform_int_distribution<std::size_t> size_d(1, max_size);
  std::uniform_int_distribution<std::size_t> len_d(1, 6);
  std::uniform_int_distribution<std::size_t> word_d(0, words.size() - 1);
  std::uniform_int_distribution<std::size_t> label_d(0, labels.size() - 1);
  std::bernoulli_distribution coin(0.5);
  const std::size_t n = size_d(gen);
  std::vector<Example> ex;
  for (std::size_t i = 0; i < n; ++i) {
    std::string utt;
    const std::size_t len = len_d(gen);
    for (std::size_t w = 0; w < len; ++w) utt += (w ? " " : "") + words[word_d(gen)];
    Output out;
    if (kind == TaskKind::single_label) {
      out = Output::intent(labels[label_d(gen)]);
    } else {
      std::string lisp = "(" + labels[label_d(gen)];
      for (const std::string& l : labels) {
        if (coin(gen)) lisp += " (" + l + ")";
      }
      out = Output::program(lisp + ")");
    }
    ex.push_back(make_example("x" + std::to_string(i), {}, utt, std::move(out)));
  }
  return Corpus(std::move(ex), kind);
}

/// A random split of the corpus: a random multiset of indices.
inline Split random_split(std::mt19937_64& gen, const Corpus& c, const std::string& symbol) {
  Split s;
  s.spec.new_symbol = symbol;
  std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);
  std::uniform_int_distribution<std::size_t> len(1, 2 * c.size());
  const std::size_t n = len(gen);
  for (std::size_t i = 0; i < n; ++i) s.entries.push_back({pick(gen), Origin::original, 0});
  s.spec.total = n;
  return s;
}

// ---- oracles ---------------------------------------------------------------

inline bool oracle_has_trigger(const Example& ex, const std::vector<std::string>& triggers) {
  for (const std::string& tok : ex.tokens) {
    for (const std::string& t : triggers) {
      if (tok == t) return true;
    }
  }
  return false;
}

inline bool oracle_has_symbol(const Example& ex, const std::string& symbol) {
  for (const std::string& s : ex.output.symbols) {
    if (s == symbol) return true;
  }
  return false;
}

inline std::optional<double> oracle_strength(const Corpus& c, const Split& s, const TriggerSet& t) {
  std::size_t with = 0;
  std::size_t both = 0;
  for (const SplitEntry& e : s.entries) {
    if (!oracle_has_trigger(c[e.index], t.tokens)) continue;
    ++with;
    if (oracle_has_symbol(c[e.index], t.symbol)) ++both;
  }
  if (with == 0) return std::nullopt;
  return static_cast<double>(both) / static_cast<double>(with);
}

inline std::optional<double> oracle_coverage(const Corpus& c, const Split& s, const TriggerSet& t) {
  std::size_t sym = 0;
  std::size_t both = 0;
  for (const SplitEntry& e : s.entries) {
    if (!oracle_has_symbol(c[e.index], t.symbol)) continue;
    ++sym;
    if (oracle_has_trigger(c[e.index], t.tokens)) ++both;
  }
  if (sym == 0) return std::nullopt;
  return static_cast<double>(both) / static_cast<double>(sym);
}

inline std::vector<std::string> oracle_diluting(const Corpus& c, const Split& s, const TriggerSet& t) {
  std::vector<std::string> ids;
  for (const SplitEntry& e : s.entries) {
    const Example& ex = c[e.index];
    if (oracle_has_trigger(ex, t.tokens) && !oracle_has_symbol(ex, t.symbol) &&
        std::find(ids.begin(), ids.end(), ex.id) == ids.end()) {
      ids.push_back(ex.id);
    }
  }
  return ids;
}

inline std::vector<std::string> oracle_competing(const Corpus& c, const IndexList& test,
                                                 const TriggerSet& t) {
  std::vector<std::string> ids;
  for (std::size_t i : test) {
    if (oracle_has_trigger(c[i], t.tokens) && !oracle_has_symbol(c[i], t.symbol)) ids.push_back(c[i].id);
  }
  return ids;
}

inline std::size_t oracle_max_setting(const Corpus& c, const IndexList& pool, const std::string& symbol,
                                      std::size_t k) {
  std::size_t without = 0;
  for (std::size_t i : pool) without += oracle_has_symbol(c[i], symbol) ? 0 : 1;
  return without + k;
}

/// Straightforward per-example loss from the model's logits.
inline double oracle_example_loss(const ModelState& m, const Instance& inst) {
  const std::size_t c = m.classes.size();
  std::vector<double> z(m.bias);
  for (std::uint32_t j : inst.features) {
    for (std::size_t k = 0; k < c; ++k) z[k] += m.weights[j * c + k];
  }
  if (m.kind == TaskKind::single_label) {
    double denom = 0.0;
    for (double v : z) denom += std::exp(v);
    return -std::log(std::exp(z[inst.labels.front()]) / denom);
  }
  double loss = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const bool pos = std::find(inst.labels.begin(), inst.labels.end(), k) != inst.labels.end();
    const double p = 1.0 / (1.0 + std::exp(-z[k]));
    loss -= pos ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

struct OracleLoss {
  double erm = 0.0;
  double dro = 0.0;
  std::map<std::uint32_t, double> means;
};

inline OracleLoss oracle_batch_loss(const ModelState& m, const std::vector<Instance>& batch) {
  OracleLoss out;
  std::map<std::uint32_t, std::pair<double, std::size_t>> acc;
  for (const Instance& inst : batch) {
    const double l = oracle_example_loss(m, inst);
    out.erm += l;
    acc[inst.group].first += l;
    acc[inst.group].second += 1;
  }
  out.erm /= static_cast<double>(batch.size());
  out.dro = -1e300;
  for (const auto& [g, p] : acc) {
    out.means[g] = p.first / static_cast<double>(p.second);
    out.dro = std::max(out.dro, out.means[g]);
  }
  return out;
}

// ---- random trainer instances ---------------------------------------------

inline FeatureConfig small_features(std::size_t dim = 64) {
  FeatureConfig f;
  f.hash_dim = dim;
  return f;
}

inline ModelState random_model(std::mt19937_64& gen, TaskKind kind, std::size_t dim, std::size_t symbols) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < symbols; ++i) names.push_back("S" + std::to_string(i));
  ModelState m = ModelState::zeros(kind, small_features(dim), names);
  std::normal_distribution<double> d(0.0, 0.5);
  for (double& w : m.weights) w = d(gen);
  for (double& b : m.bias) b = d(gen);
  return m;
}

inline std::vector<Instance> random_batch(std::mt19937_64& gen, const ModelState& m, std::size_t n,
                                   std::uint32_t groups) {
  std::uniform_int_distribution<std::uint32_t> bucket(0, static_cast<std::uint32_t>(m.features.hash_dim - 1));
  std::uniform_int_distribution<std::uint32_t> cls(0, static_cast<std::uint32_t>(m.classes.size() - 1));
  std::uniform_int_distribution<std::uint32_t> grp(0, groups - 1);
  std::uniform_int_distribution<int> nfeat(0, 8);
  std::bernoulli_distribution coin(0.4);
  std::vector<Instance> batch(n);
  for (Instance& inst : batch) {
    const int f = nfeat(gen);
    for (int i = 0; i < f; ++i) inst.features.push_back(bucket(gen));
    std::sort(inst.features.begin(), inst.features.end());
    inst.features.erase(std::unique(inst.features.begin(), inst.features.end()), inst.features.end());
    if (m.kind == TaskKind::single_label) {
      inst.labels.push_back(cls(gen));
    } else {
      for (std::uint32_t k = 0; k < m.classes.size(); ++k) {
        if (coin(gen)) inst.labels.push_back(k);
      }
    }
    inst.group = grp(gen);
  }
  return batch;
}

/// Norm-wise relative difference.
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / denom;
}

/// Central-difference gradient of batch_loss over every weight and bias.
inline std::vector<double> numeric_gradient(ModelState m, const std::vector<Instance>& batch, const TrainConfig& cfg) {
  constexpr double h = 1e-5;
  std::vector<double> g;
  auto probe = [&](double& p) {
    const double keep = p;
    p = keep + h;
    const double up = batch_loss(m, batch, cfg).loss;
    p = keep - h;
    const double down = batch_loss(m, batch, cfg).loss;
    p = keep;
    g.push_back((up - down) / (2 * h));
  };
  for (double& w : m.weights) probe(w);
  for (double& b : m.bias) probe(b);
  return g;
}

inline std::vector<double> flatten(const Gradient& g) {
  std::vector<double> out = g.weights;
  out.insert(out.end(), g.bias.begin(), g.bias.end());
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("isl-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace isl::test
