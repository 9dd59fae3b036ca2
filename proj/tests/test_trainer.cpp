#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isl/error.hpp"
#include "isl/eval.hpp"
#include "isl/synth.hpp"
#include "isl/trainer.hpp"
#include "support.hpp"

using namespace isl;
using test::flatten;
using test::numeric_gradient;
using test::random_batch;
using test::random_model;
using test::rel_error;
using test::small_features;

namespace {

/// Each label owns one word; every example also carries shared noise.
Corpus separable_corpus() {
  std::vector<Example> ex;
  const std::vector<std::pair<std::string, std::string>> kinds = {
      {"alpha", "A"}, {"bravo", "B"}, {"charlie", "C"}, {"delta", "D"}};
  const std::vector<std::string> noise = {"the", "a", "please", "now", "my"};
  for (int i = 0; i < 80; ++i) {
    const auto& [word, label] = kinds[static_cast<std::size_t>(i) % kinds.size()];
    const std::string utt = noise[static_cast<std::size_t>(i) % noise.size()] + " " + word + " " +
                            noise[static_cast<std::size_t>(i * 7 + 3) % noise.size()];
    ex.push_back(make_example("s" + std::to_string(i), {}, utt, Output::intent(label)));
  }
  return Corpus(std::move(ex), TaskKind::single_label);
}

}  // namespace

TEST_CASE("featurize") {
  const FeatureConfig f = small_features(1 << 12);
  const Tokens t = {"play", "the", "radio", "now"};
  const Tokens shuffled = {"now", "radio", "play", "the", "play"};
  CHECK(featurize(t, f) == featurize(shuffled, f));
  CHECK(featurize({}, f).empty());
  const FeatureVector v = featurize(t, f);
  CHECK(std::is_sorted(v.begin(), v.end()));
  CHECK(v.size() == 4);

  Tokens many;
  for (int i = 0; i < 200; ++i) many.push_back("w" + std::to_string(i));
  const FeatureVector tiny = featurize(many, small_features(16));
  CHECK(tiny.size() == 16);  // 200 words must collide into all 16 buckets
  CHECK(std::adjacent_find(tiny.begin(), tiny.end()) == tiny.end());
  for (std::uint32_t b : tiny) CHECK(b < 16);

  FeatureConfig bi = f;
  bi.ngram_order = 2;
  CHECK(featurize(t, bi).size() > v.size());
  CHECK_THROWS_AS(small_features(100).validate(), Error);
}

TEST_CASE("zero model loss is ln(C)") {
  const ModelState m = ModelState::zeros(TaskKind::single_label, small_features(), {"A", "B", "C"});
  CHECK(m.classes.back() == kOtherClass);
  std::mt19937_64 gen(1);
  const auto batch = random_batch(gen, m, 10, 2);
  CHECK(batch_loss(m, batch, {}).loss == doctest::Approx(std::log(4.0)));
  const ModelState ms = ModelState::zeros(TaskKind::symbol_set, small_features(), {"A", "B", "C"});
  CHECK(batch_loss(ms, random_batch(gen, ms, 10, 2), {}).loss == doctest::Approx(3.0 * std::log(2.0)));
  CHECK_THROWS_AS(batch_loss(m, std::span<const Instance>{}, {}), Error);
}

TEST_CASE("batch loss matches the oracle") {
  std::mt19937_64 gen(2);
  for (int r = 0; r < 50; ++r) {
    const TaskKind kind = r % 2 ? TaskKind::symbol_set : TaskKind::single_label;
    const ModelState m = random_model(gen, kind, 32, 1 + static_cast<std::size_t>(r) % 5);
    const auto batch = random_batch(gen, m, 1 + static_cast<std::size_t>(r) % 17, 3);
    const test::OracleLoss want = test::oracle_batch_loss(m, batch);
    TrainConfig erm;
    TrainConfig dro;
    dro.objective = Objective::group_dro;
    CHECK(batch_loss(m, batch, erm).loss == doctest::Approx(want.erm).epsilon(1e-12));
    const BatchLoss got = batch_loss(m, batch, dro);
    CHECK(got.loss == doctest::Approx(want.dro).epsilon(1e-12));
    for (const auto& [g, v] : want.means) CHECK(got.group_means.at(g) == doctest::Approx(v).epsilon(1e-12));
    CHECK(got.group_means.at(got.worst_group) == got.loss);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 gen(3);
  for (int r = 0; r < 12; ++r) {
    const TaskKind kind = r % 2 ? TaskKind::symbol_set : TaskKind::single_label;
    const ModelState m = random_model(gen, kind, 16 << (r % 3), 2 + static_cast<std::size_t>(r) % 3);
    const auto batch = random_batch(gen, m, 12, 3);
    for (Objective obj : {Objective::erm, Objective::group_dro}) {
      TrainConfig cfg;
      cfg.objective = obj;
      const double err = rel_error(flatten(batch_gradient(m, batch, cfg)), numeric_gradient(m, batch, cfg));
      CHECK(err <= 1e-5);
    }
  }
}

TEST_CASE("one group makes DRO equal ERM") {
  std::mt19937_64 gen(4);
  const ModelState m = random_model(gen, TaskKind::single_label, 32, 4);
  const auto batch = random_batch(gen, m, 20, 1);
  TrainConfig erm;
  TrainConfig dro;
  dro.objective = Objective::group_dro;
  CHECK(batch_loss(m, batch, erm).loss == batch_loss(m, batch, dro).loss);
  const Gradient ge = batch_gradient(m, batch, erm);
  const Gradient gd = batch_gradient(m, batch, dro);
  CHECK(ge.weights == gd.weights);
  CHECK(ge.bias == gd.bias);
}

TEST_CASE("loss ignores batch order and duplication") {
  std::mt19937_64 gen(5);
  const ModelState m = random_model(gen, TaskKind::single_label, 32, 4);
  auto batch = random_batch(gen, m, 15, 3);
  for (Objective obj : {Objective::erm, Objective::group_dro}) {
    TrainConfig cfg;
    cfg.objective = obj;
    const double base = batch_loss(m, batch, cfg).loss;
    auto shuffled = batch;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    CHECK(batch_loss(m, shuffled, cfg).loss == doctest::Approx(base).epsilon(1e-12));
    auto doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    CHECK(batch_loss(m, doubled, cfg).loss == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("separable toy is learned perfectly") {
  const Corpus c = separable_corpus();
  const Split s = test::whole_split(c, "A");
  TrainConfig cfg;
  cfg.epochs = 20;
  const ModelState m = train(c, s, test::all_indices(c), cfg, small_features(1 << 10));
  for (const Example& ex : c.examples()) CHECK(exact_match(m, ex));
  CHECK(train(c, s, test::all_indices(c), cfg, small_features(1 << 10)) == m);
  TrainConfig dro = cfg;
  dro.objective = Objective::group_dro;
  const ModelState md = train(c, s, test::all_indices(c), dro, small_features(1 << 10));
  for (const Example& ex : c.examples()) CHECK(exact_match(md, ex));
}

TEST_CASE("group DRO recovers a rare diluted symbol at least as well as ERM") {
  // Binary grouping makes the rare symbol the worst group whenever it is in
  // the batch.
  const SynthSpec spec = synth_spec_from_json(nlohmann::json::parse(
      R"({"symbols": 4, "p_cross": 0.03, "topic_share": 0.15, "seed": 11})"));
  const Corpus c = generate_corpus(spec, {{"s0", 200}, {"s1", 1500}, {"s2", 1500}, {"s3", 1500}});
  const EvalCarve carve = carve_eval(c, 0.1, 0.2, 0);
  const FeatureConfig f = small_features(1 << 14);
  for (std::uint64_t seed : {0, 1, 2}) {
    const Split s = make_split(c, carve.train_pool, {"s0", 20, 2000, seed, "src"});
    TrainConfig erm;
    erm.learning_rate = 5;
    erm.epochs = 15;
    erm.batch_size = 16;
    erm.seed = seed;
    erm.grouping = Grouping::contains_symbol;
    erm.new_symbol = "s0";
    TrainConfig dro = erm;
    dro.objective = Objective::group_dro;
    const MetricReport re = evaluate(train(c, s, carve.dev, erm, f), c, carve.test, "s0", std::nullopt);
    const MetricReport rd = evaluate(train(c, s, carve.dev, dro, f), c, carve.test, "s0", std::nullopt);
    REQUIRE(re.new_symbol_acc.has_value());
    REQUIRE(rd.new_symbol_acc.has_value());
    CAPTURE(seed);
    CHECK(*rd.new_symbol_acc >= *re.new_symbol_acc);
  }
}

TEST_CASE("predictions of untrained models") {
  const ModelState m = ModelState::zeros(TaskKind::single_label, small_features(), {"B", "A"});
  const Example ex = make_example("p", {}, "anything at all", Output::intent("A"));
  CHECK(predict(m, ex) == std::vector<std::string>{"A"});  // class 0 after sorting
  ModelState ms = ModelState::zeros(TaskKind::symbol_set, small_features(), {"A", "B"});
  for (double& b : ms.bias) b = -1.0;
  CHECK(predict(ms, ex).empty());
}

TEST_CASE("grouping rules") {
  const ModelState ms = ModelState::zeros(TaskKind::symbol_set, small_features(), {"A", "B"});
  const Example ex = make_example("p", {}, "x", Output::program("(A (B))"));
  CHECK_THROWS_AS(make_instance(ms, ex, {}), Error);
  TrainConfig cfg;
  cfg.grouping = Grouping::contains_symbol;
  cfg.new_symbol = "B";
  CHECK(make_instance(ms, ex, cfg).group == 1);
  const ModelState m = ModelState::zeros(TaskKind::single_label, small_features(), {"A"});
  const Instance unseen = make_instance(m, make_example("q", {}, "x", Output::intent("Z")), {});
  CHECK(unseen.labels == std::vector<std::uint32_t>{1});
}

TEST_CASE("model and config json round trips") {
  std::mt19937_64 gen(6);
  for (TaskKind kind : {TaskKind::single_label, TaskKind::symbol_set}) {
    const ModelState m = random_model(gen, kind, 64, 3);
    CHECK(model_from_json(nlohmann::json::parse(to_json(m).dump())) == m);
    const auto path = test::scratch_dir("model") / "m.json";
    save_model(m, path);
    CHECK(load_model(path) == m);
  }
  TrainConfig cfg;
  cfg.objective = Objective::group_dro;
  cfg.grouping = Grouping::contains_symbol;
  cfg.new_symbol = "s0";
  cfg.learning_rate = 3;
  const TrainConfig back = train_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
  CHECK(to_json(back) == to_json(cfg));
  FeatureConfig f = small_features(256);
  f.ngram_order = 2;
  CHECK(feature_config_from_json(nlohmann::json::parse(to_json(f).dump())) == f);
}
