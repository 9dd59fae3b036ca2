#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "isl/sweep.hpp"
#include "support.hpp"

using namespace isl;

namespace {

std::filesystem::path g_dir;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put(const std::filesystem::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

Run run(const std::string& args) {
  const auto out = g_dir / "stdout.txt";
  const auto err = g_dir / "stderr.txt";
  const std::string cmd = std::string(ISL_BIN) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string p(const char* name) { return (g_dir / name).string(); }

}  // namespace

TEST_CASE("pipeline through every subcommand") {
  g_dir = test::scratch_dir("cli");
  put(g_dir / "spec.json", R"({"symbols": 3, "p_cross": 0.05, "seed": 1})");
  put(g_dir / "trig.json", R"({"symbol": "s0", "tokens": ["t0a", "t0b"], "origin": "manual"})");
  put(g_dir / "cfg.json", R"({"trainer": {"learning_rate": 2, "epochs": 3}, "features": {"hash_dim": 4096}})");

  Run r = run("synth " + p("spec.json") + " --n-per-symbol 400 --out " + p("c.jsonl"));
  REQUIRE(r.code == 0);
  r = run("ingest " + p("c.jsonl") + " --out " + p("canon.jsonl"));
  CHECK(r.code == 0);
  CHECK(r.out.find("s0") != std::string::npos);
  CHECK(slurp(g_dir / "canon.jsonl") == slurp(g_dir / "c.jsonl"));

  r = run("split " + p("c.jsonl") + " --symbol s0 -k 20 -N 500 --seed 3 --out " + p("split.json"));
  REQUIRE(r.code == 0);
  const auto split = nlohmann::json::parse(slurp(g_dir / "split.json"));
  CHECK(split["train_ids"].size() == 500);
  CHECK(split["spec"]["source"].get<std::string>().size() == 16);

  r = run("signal " + p("c.jsonl") + " --split " + p("split.json") + " --triggers " + p("trig.json") +
          " --out " + p("signal.csv"));
  CHECK(r.code == 0);
  const auto sig = parse_csv(slurp(g_dir / "signal.csv"));
  REQUIRE(sig.size() == 2);
  CHECK(sig[0][0] == "symbol");
  CHECK(std::stod(sig[1][2]) < 1.0);

  r = run("dilute " + p("c.jsonl") + " --split " + p("split.json") + " --triggers " + p("trig.json") +
          " --out " + p("clean.json"));
  REQUIRE(r.code == 0);
  r = run("signal " + p("c.jsonl") + " --split " + p("clean.json") + " --triggers " + p("trig.json"));
  CHECK(parse_csv(r.out)[1][2] == "1");

  r = run("upsample " + p("c.jsonl") + " --split " + p("split.json") + " --mode fixed --ratio 4 --out " +
          p("up.json"));
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(slurp(g_dir / "up.json"))["train_ids"].size() == 500 + 20 * 3);
  r = run("upsample " + p("c.jsonl") + " --split " + p("split.json") + " --mode adaptive --base-ratio 1/10");
  CHECK(r.code == 0);

  r = run("train " + p("c.jsonl") + " --split " + p("split.json") + " --config " + p("cfg.json") + " --out " +
          p("model.json"));
  REQUIRE(r.code == 0);
  r = run("eval " + p("c.jsonl") + " --model " + p("model.json") + " --symbol s0 --triggers " + p("trig.json") +
          " --resamples 200 --out " + p("metrics.json"));
  REQUIRE(r.code == 0);
  const auto metrics = nlohmann::json::parse(slurp(g_dir / "metrics.json"));
  CHECK(metrics["overall_acc"].get<double>() > 0.5);
  CHECK(metrics.contains("ci"));
}

TEST_CASE("sweep and report") {
  g_dir = test::scratch_dir("cli-sweep");
  put(g_dir / "m.json", R"({
    "corpus": {"synth": {"symbols": 3, "p_cross": 0.05, "seed": 3, "n_per_symbol": 200}},
    "symbols": ["s0"], "k": 10, "n_grid": [100, 200],
    "settings": ["baseline", "no-dilution"], "seeds": [0, 1],
    "triggers": "synth",
    "trainer": {"learning_rate": 2, "epochs": 3, "batch_size": 16},
    "features": {"hash_dim": 1024},
    "bootstrap": {"resamples": 100},
    "output_dir": "ignored"
  })");
  Run r = run("sweep " + p("m.json") + " --out " + p("out") + " --workers 2");
  REQUIRE(r.code == 0);
  CHECK_FALSE(std::filesystem::exists(g_dir / "ignored"));
  const auto rows = read_rows_csv(slurp(g_dir / "out" / "results.csv"));
  CHECK(rows.size() == 8);
  r = run("sweep " + p("m.json") + " --out " + p("one") + " --seed 1");
  REQUIRE(r.code == 0);
  CHECK(read_rows_csv(slurp(g_dir / "one" / "results.csv")).size() == 4);

  r = run("report " + p("out/results.csv") + " --kind all --out " + p("rep"));
  REQUIRE(r.code == 0);
  for (const char* kind : {"accuracy", "strength", "competing"}) {
    CHECK(std::filesystem::exists(g_dir / "rep" / (std::string(kind) + ".csv")));
  }
  r = run("report " + p("out/results.csv") + " --kind pie --out " + p("rep"));
  CHECK(r.code == 1);
  CHECK(r.err.find("unknown report kind 'pie'") != std::string::npos);
}

TEST_CASE("errors exit nonzero with a message") {
  g_dir = test::scratch_dir("cli-err");
  put(g_dir / "bad.jsonl", "{not json\n");
  Run r = run("ingest " + p("bad.jsonl"));
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error:", 0) == 0);
  CHECK(run("").code != 0);
  CHECK(run("frobnicate").code != 0);
}
