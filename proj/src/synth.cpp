#include "isl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <span>

#include "isl/error.hpp"
#include "isl/random.hpp"

namespace isl {

const SynthSymbol& SynthSpec::symbol(std::string_view name) const {
  for (const SynthSymbol& s : symbols) {
    if (s.name == name) return s;
  }
  throw Error("synthetic spec has no symbol '" + std::string(name) + "'");
}

void SynthSpec::validate() const {
  if (symbols.empty()) throw Error("synthetic spec: empty symbol list");
  if (vocab_size == 0) throw Error("synthetic spec: vocab_size must be positive");
  if (!(topic_share >= 0.0 && topic_share <= 1.0)) throw Error("synthetic spec: topic_share must be in [0, 1]");
  std::set<std::string> names;
  std::set<std::string> triggers;
  for (const SynthSymbol& s : symbols) {
    if (!names.insert(s.name).second) throw Error("synthetic spec: duplicate symbol " + s.name);
    if (s.p_trig < 0 || s.p_trig > 1 || s.p_cross < 0 || s.p_cross > 1) {
      throw Error("synthetic spec: probabilities of " + s.name + " outside [0, 1]");
    }
    if (s.min_length < 1 || s.max_length < s.min_length) {
      throw Error("synthetic spec: bad length range for " + s.name);
    }
    if (s.triggers.empty() && (s.p_trig > 0 || s.p_cross > 0)) {
      throw Error("synthetic spec: " + s.name + " has no trigger tokens");
    }
    for (const std::string& t : s.triggers) {
      if (tokenize(t) != Tokens{t}) {
        throw Error("synthetic spec: trigger '" + t + "' is not a single lowercase token");
      }
      if (!triggers.insert(t).second) {
        throw Error("synthetic spec: trigger '" + t + "' shared between symbols");
      }
    }
  }
}

namespace {

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent) : cdf_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cdf_[r] = total;
    }
    for (double& c : cdf_) c /= total;
  }

  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

std::string join_tokens(const std::vector<std::string>& words) {
  std::string out;
  for (const std::string& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

Corpus generate_corpus(const SynthSpec& spec,
                       const std::map<std::string, std::size_t>& n_per_symbol) {
  spec.validate();
  const ZipfSampler zipf(spec.vocab_size, spec.zipf_exponent);
  std::vector<Example> examples;

  for (std::size_t si = 0; si < spec.symbols.size(); ++si) {
    const SynthSymbol& sym = spec.symbols[si];
    auto count_it = n_per_symbol.find(sym.name);
    if (count_it == n_per_symbol.end()) continue;
    if (count_it->second == 0) throw Error("synthetic counts must be >= 1 for " + sym.name);
    Rng rng(derive_seed(spec.seed, "synth/" + sym.name));
    std::vector<std::size_t> topic(spec.vocab_size);
    for (std::size_t r = 0; r < topic.size(); ++r) topic[r] = r;
    Rng topic_rng(derive_seed(spec.seed, "synth/topic/" + sym.name));
    topic_rng.shuffle(std::span<std::size_t>(topic));

    for (std::size_t i = 0; i < count_it->second; ++i) {
      const auto len = static_cast<std::size_t>(rng.between(sym.min_length, sym.max_length));
      std::vector<std::string> words(len);
      for (auto& w : words) {
        const bool own = rng.bernoulli(spec.topic_share);
        const std::size_t rank = zipf(rng);
        w = "w" + std::to_string(own ? topic[rank] : rank);
      }

      std::vector<std::size_t> free_pos(len);
      for (std::size_t p = 0; p < len; ++p) free_pos[p] = p;
      auto inject = [&](const std::string& token) {
        if (free_pos.empty()) {
          words.push_back(token);
          return;
        }
        const std::size_t pick = rng.below(free_pos.size());
        words[free_pos[pick]] = token;
        free_pos.erase(free_pos.begin() + static_cast<std::ptrdiff_t>(pick));
      };

      if (rng.bernoulli(sym.p_trig)) inject(sym.triggers[rng.below(sym.triggers.size())]);
      for (std::size_t oi = 0; oi < spec.symbols.size(); ++oi) {
        if (oi == si) continue;
        const SynthSymbol& other = spec.symbols[oi];
        if (rng.bernoulli(other.p_cross)) {
          inject(other.triggers[rng.below(other.triggers.size())]);
        }
      }
      examples.push_back(make_example(sym.name + "-" + std::to_string(i), {}, join_tokens(words),
                                      Output::intent(sym.name)));
    }
  }
  if (examples.empty()) throw Error("synthetic counts select no symbols");
  return Corpus(std::move(examples), TaskKind::single_label);
}

double expected_strength(double p_trig, double p_cross, std::size_t total, std::size_t new_count) {
  if (new_count == 0 || new_count > total) throw Error("expected_strength: need 0 < k <= N");
  const double k = static_cast<double>(new_count);
  const double rest = static_cast<double>(total - new_count);
  const double denom = k * p_trig + rest * p_cross;
  if (denom <= 0.0) throw UndefinedStatistic("expected_strength: no trigger-bearing examples");
  return k * p_trig / denom;
}

double expected_strength(const SynthSpec& spec, std::string_view symbol, std::size_t total,
                         std::size_t new_count) {
  const SynthSymbol& s = spec.symbol(symbol);
  return expected_strength(s.p_trig, s.p_cross, total, new_count);
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec spec;
  spec.vocab_size = j.value("vocab_size", spec.vocab_size);
  spec.zipf_exponent = j.value("zipf_exponent", spec.zipf_exponent);
  spec.seed = j.value("seed", spec.seed);
  spec.topic_share = j.value("topic_share", spec.topic_share);
  const double default_p_trig = j.value("p_trig", 1.0);
  const double default_p_cross = j.value("p_cross", 0.0);
  const auto& syms = j.at("symbols");
  if (syms.is_number_integer()) {
    // Shorthand: N symbols named s0..s{N-1}, each with triggers t{i}a, t{i}b.
    const int n = syms.get<int>();
    for (int i = 0; i < n; ++i) {
      SynthSymbol s;
      s.name = "s" + std::to_string(i);
      s.triggers = {"t" + std::to_string(i) + "a", "t" + std::to_string(i) + "b"};
      s.p_trig = default_p_trig;
      s.p_cross = default_p_cross;
      spec.symbols.push_back(std::move(s));
    }
  } else {
    for (const auto& js : syms) {
      SynthSymbol s;
      s.name = js.at("name").get<std::string>();
      s.triggers = js.at("triggers").get<std::vector<std::string>>();
      s.p_trig = js.value("p_trig", default_p_trig);
      s.p_cross = js.value("p_cross", default_p_cross);
      s.min_length = js.value("min_length", s.min_length);
      s.max_length = js.value("max_length", s.max_length);
      spec.symbols.push_back(std::move(s));
    }
  }
  spec.validate();
  return spec;
}

nlohmann::ordered_json to_json(const SynthSpec& spec) {
  nlohmann::ordered_json j;
  j["vocab_size"] = spec.vocab_size;
  j["zipf_exponent"] = spec.zipf_exponent;
  j["seed"] = spec.seed;
  j["topic_share"] = spec.topic_share;
  auto syms = nlohmann::ordered_json::array();
  for (const SynthSymbol& s : spec.symbols) {
    nlohmann::ordered_json js;
    js["name"] = s.name;
    js["triggers"] = s.triggers;
    js["p_trig"] = s.p_trig;
    js["p_cross"] = s.p_cross;
    js["min_length"] = s.min_length;
    js["max_length"] = s.max_length;
    syms.push_back(std::move(js));
  }
  j["symbols"] = std::move(syms);
  return j;
}

}  // namespace isl
