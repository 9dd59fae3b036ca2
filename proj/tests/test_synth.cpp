#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isl/error.hpp"
#include "isl/signal.hpp"
#include "isl/splits.hpp"
#include "isl/synth.hpp"
#include "support.hpp"

using namespace isl;

namespace {

SynthSpec two_symbols(double p_trig, double p_cross, std::uint64_t seed = 1) {
  SynthSpec spec;
  spec.seed = seed;
  spec.symbols = {{"new", {"ta", "tb"}, p_trig, p_cross, 5, 12},
                  {"old", {"tc"}, 1.0, 0.0, 5, 12}};
  return spec;
}

}  // namespace

TEST_CASE("expected_strength arithmetic") {
  CHECK(expected_strength(1.0, 0.02, 750, 30) == doctest::Approx(30.0 / 44.4));
  CHECK(expected_strength(1.0, 0.02, 15000, 30) == doctest::Approx(30.0 / 329.4));
  CHECK(expected_strength(1.0, 0.0, 15000, 30) == 1.0);
  CHECK_THROWS_AS(expected_strength(0.0, 0.0, 100, 10), UndefinedStatistic);
  CHECK_THROWS_AS(expected_strength(1.0, 0.1, 10, 0), Error);
  double prev = 2.0;
  for (std::size_t n = 30; n <= 20000; n += 397) {
    const double v = expected_strength(1.0, 0.02, n, 30);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("generation is deterministic and counts are honored") {
  const SynthSpec spec = two_symbols(1.0, 0.05);
  const std::map<std::string, std::size_t> counts = {{"new", 40}, {"old", 300}};
  const Corpus a = generate_corpus(spec, counts);
  const Corpus b = generate_corpus(spec, counts);
  CHECK(serialize_corpus(a) == serialize_corpus(b));
  CHECK(a.symbol_inventory().at("new") == 40);
  CHECK(a.symbol_inventory().at("old") == 300);
  SynthSpec other = spec;
  other.seed = 2;
  CHECK(serialize_corpus(generate_corpus(other, counts)) != serialize_corpus(a));
}

TEST_CASE("a symbol's examples do not depend on the other counts") {
  const SynthSpec spec = two_symbols(1.0, 0.05);
  const Corpus a = generate_corpus(spec, {{"new", 40}, {"old", 100}});
  const Corpus b = generate_corpus(spec, {{"new", 40}, {"old", 900}});
  for (std::size_t i = 0; i < 40; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("p_cross = 0 gives no diluting examples") {
  const SynthSpec spec = two_symbols(1.0, 0.0);
  const Corpus c = generate_corpus(spec, {{"new", 50}, {"old", 500}});
  const TriggerSet t{"new", {"ta", "tb"}, TriggerOrigin::manual};
  CHECK(find_diluting(c, test::whole_split(c, "new"), t).empty());
}

TEST_CASE("p_trig = 1 puts a trigger in every positive example") {
  const SynthSpec spec = two_symbols(1.0, 0.0);
  const Corpus c = generate_corpus(spec, {{"new", 200}, {"old", 10}});
  for (const Example& ex : c.examples()) {
    if (ex.output.label != "new") continue;
    CHECK(test::oracle_has_trigger(ex, {"ta", "tb"}));
    CHECK(ex.tokens.size() >= 5);
    CHECK(ex.tokens.size() <= 12);
  }
}

TEST_CASE("validation") {
  SynthSpec spec = two_symbols(1.0, 0.0);
  spec.symbols[1].triggers = {"ta"};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = two_symbols(1.2, 0.0);
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = two_symbols(1.0, 0.0);
  spec.symbols.clear();
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = two_symbols(1.0, 0.0);
  spec.symbols[0].triggers = {"two words"};
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("measured strength tracks expected_strength (Monte Carlo)") {
  // k=30 new-symbol examples among N=3000, regenerated 50 times.
  constexpr std::size_t k = 30;
  constexpr std::size_t n = 3000;
  const double expected = expected_strength(1.0, 0.02, n, k);
  double sum = 0.0;
  double sq = 0.0;
  constexpr int reps = 50;
  for (int r = 0; r < reps; ++r) {
    const SynthSpec spec = two_symbols(1.0, 0.02, 100 + static_cast<std::uint64_t>(r));
    const Corpus c = generate_corpus(spec, {{"new", k}, {"old", n - k}});
    const double s = source_signal_strength(c, test::whole_split(c, "new"),
                                            {"new", {"ta", "tb"}, TriggerOrigin::manual});
    sum += s;
    sq += s * s;
  }
  const double mean = sum / reps;
  const double sd = std::sqrt(std::max(0.0, sq / reps - mean * mean));
  // The ratio estimator is slightly biased upward; 4 standard errors plus
  // that bias is generous but still tight against a wrong formula.
  CHECK(std::abs(mean - expected) < 4.0 * sd / std::sqrt(reps) + 0.01);
}

TEST_CASE("strength converges at large N") {
  const SynthSpec spec = two_symbols(1.0, 0.02, 9);
  const std::size_t k = 2000;
  const std::size_t n = 100000;
  const Corpus c = generate_corpus(spec, {{"new", k}, {"old", n - k}});
  const double s = source_signal_strength(c, test::whole_split(c, "new"),
                                          {"new", {"ta", "tb"}, TriggerOrigin::manual});
  CHECK(std::abs(s - expected_strength(spec, "new", n, k)) < 0.02);
}

TEST_CASE("topic share makes background informative") {
  SynthSpec spec = two_symbols(0.0, 0.0);
  spec.topic_share = 1.0;
  const Corpus c = generate_corpus(spec, {{"new", 300}, {"old", 300}});
  std::map<std::string, std::size_t> top_new;
  std::map<std::string, std::size_t> top_old;
  for (const Example& ex : c.examples()) {
    for (const std::string& t : ex.tokens) ++(ex.output.label == "new" ? top_new : top_old)[t];
  }
  auto argmax = [](const std::map<std::string, std::size_t>& m) {
    return std::max_element(m.begin(), m.end(), [](auto& a, auto& b) { return a.second < b.second; })
        ->first;
  };
  CHECK(argmax(top_new) != argmax(top_old));
}

TEST_CASE("json round trip and shorthand") {
  const SynthSpec spec = synth_spec_from_json(
      nlohmann::json::parse(R"({"symbols": 3, "p_trig": 0.9, "p_cross": 0.01, "seed": 4})"));
  REQUIRE(spec.symbols.size() == 3);
  CHECK(spec.symbols[2].name == "s2");
  CHECK(spec.symbols[2].triggers == std::vector<std::string>{"t2a", "t2b"});
  CHECK(spec.symbols[0].p_trig == 0.9);
  const SynthSpec back = synth_spec_from_json(nlohmann::json::parse(to_json(spec).dump()));
  CHECK(to_json(back) == to_json(spec));
}

TEST_CASE("stratified carve keeps proportions") {
  const SynthSpec spec = two_symbols(1.0, 0.02);
  const Corpus c = generate_corpus(spec, {{"new", 137}, {"old", 863}});
  const EvalCarve e = carve_eval(c, 0.1, 0.2, 3);
  std::map<std::string, std::size_t> in_test;
  for (std::size_t i : e.test) ++in_test[c[i].output.label];
  CHECK(std::abs(static_cast<double>(in_test["new"]) - 137 * 0.2) <= 1.0);
  CHECK(std::abs(static_cast<double>(in_test["old"]) - 863 * 0.2) <= 1.0);
}
