// isl: command-line driver for corpora, splits, interventions, training and sweeps.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "isl/error.hpp"
#include "isl/sampling.hpp"
#include "isl/signal.hpp"
#include "isl/splits.hpp"
#include "isl/sweep.hpp"
#include "isl/synth.hpp"
#include "isl/trainer.hpp"

namespace {

using nlohmann::json;

struct CorpusArgs {
  std::string path;
  std::string task = "intent";
  double dev_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t carve_seed = 0;
};

void add_corpus_args(CLI::App* cmd, CorpusArgs& a, bool carve) {
  cmd->add_option("corpus", a.path, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  cmd->add_option("--task", a.task, "intent | program")->check(CLI::IsMember({"intent", "program"}));
  if (carve) {
    cmd->add_option("--dev-fraction", a.dev_fraction, "Dev share of the corpus");
    cmd->add_option("--test-fraction", a.test_fraction, "Test share of the corpus");
    cmd->add_option("--carve-seed", a.carve_seed, "Seed of the dev/test carve");
  }
}

isl::Corpus load(const CorpusArgs& a) { return isl::load_corpus(a.path, isl::parse_task_kind(a.task)); }

isl::EvalCarve carve(const isl::Corpus& c, const CorpusArgs& a) {
  isl::EvalCarve e = isl::carve_eval(c, a.dev_fraction, a.test_fraction, a.carve_seed);
  for (const std::string& w : e.warnings) std::cerr << "warning: " << w << "\n";
  return e;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw isl::Error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw isl::Error("'" + path + "': " + e.what());
  }
}

void emit(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
    return;
  }
  const std::filesystem::path p(out);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw isl::Error("cannot write '" + out + "'");
  f << content;
}

isl::Split load_split(const isl::Corpus& c, const std::string& path) {
  return isl::split_from_json(c, read_json(path));
}

isl::TriggerSet resolve_triggers(const std::string& source, const std::string& symbol) {
  std::vector<isl::TriggerSet> sets;
  if (source == "bundled") {
    sets = isl::bundled_trigger_sets();
  } else {
    sets = isl::trigger_sets_from_json(read_json(source));
  }
  auto t = isl::find_trigger_set(sets, symbol);
  if (!t) throw isl::Error("no trigger set for '" + symbol + "' in " + source);
  return *t;
}

std::string split_text(const isl::Corpus& c, const isl::Split& s) { return to_json(c, s).dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source-signal experiments for new-symbol learning"};
  app.require_subcommand(1);

  CorpusArgs ca;
  std::string out;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string symbol;
  std::string split_path;
  std::string triggers = "bundled";

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and print its symbol inventory");
  add_corpus_args(ingest, ca, false);
  ingest->add_option("--out", out, "Write the canonical serialization here");

  // synth
  std::string synth_spec;
  std::size_t n_per_symbol = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus from a spec");
  synth->add_option("spec", synth_spec, "SynthSpec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--n-per-symbol", n_per_symbol, "Examples per symbol (overrides the spec)");
  synth->add_option("--seed", seed, "Generator seed (overrides the spec)");
  synth->add_option("--out", out, "Output JSONL")->required();

  // split
  std::size_t k = 30;
  std::string n_text;
  auto* split = app.add_subcommand("split", "Sample a training split with k new-symbol examples");
  add_corpus_args(split, ca, true);
  split->add_option("--symbol", symbol, "New symbol")->required();
  split->add_option("-k", k, "New-symbol examples");
  split->add_option("-N,--total", n_text, "Split size, or \"max\"")->required();
  split->add_option("--seed", seed, "Split seed");
  split->add_option("--out", out, "Split JSON");

  // signal
  auto* signal = app.add_subcommand("signal", "Report source signal strength of a split");
  add_corpus_args(signal, ca, false);
  signal->add_option("--split", split_path, "Split JSON")->required()->check(CLI::ExistingFile);
  signal->add_option("--triggers", triggers, "\"bundled\" or a trigger-set JSON file");
  signal->add_option("--out", out, "CSV output");

  // dilute
  auto* dilute = app.add_subcommand("dilute", "Replace diluting entries with backfill examples");
  add_corpus_args(dilute, ca, true);
  bool allow_deficit = false;
  std::optional<double> target_strength;
  dilute->add_option("--split", split_path, "Split JSON")->required()->check(CLI::ExistingFile);
  dilute->add_option("--triggers", triggers, "\"bundled\" or a trigger-set JSON file");
  dilute->add_flag("--allow-deficit", allow_deficit, "Drop entries when the backfill pool runs dry");
  dilute->add_option("--target-strength", target_strength, "Stop once strength reaches this value");
  dilute->add_option("--out", out, "Split JSON");

  // upsample
  std::string mode = "fixed";
  std::size_t ratio = 32;
  std::string base_ratio;
  auto* upsample = app.add_subcommand("upsample", "Duplicate new-symbol entries");
  add_corpus_args(upsample, ca, false);
  upsample->add_option("--split", split_path, "Split JSON")->required()->check(CLI::ExistingFile);
  upsample->add_option("--mode", mode, "fixed | adaptive")->check(CLI::IsMember({"fixed", "adaptive"}));
  upsample->add_option("--ratio", ratio, "Copies per example (fixed)");
  upsample->add_option("--base-ratio", base_ratio, "Target share as num/den (adaptive)");
  upsample->add_option("--out", out, "Split JSON");

  // train
  std::string config_path;
  bool dro = false;
  auto* train = app.add_subcommand("train", "Train a model on a split");
  add_corpus_args(train, ca, true);
  train->add_option("--split", split_path, "Split JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--config", config_path, "JSON with optional \"trainer\" and \"features\"")
      ->check(CLI::ExistingFile);
  train->add_flag("--dro", dro, "Group DRO objective");
  train->add_option("--seed", seed, "Training seed");
  train->add_option("--out", out, "Model JSON")->required();

  // eval
  std::string model_path;
  std::size_t resamples = 1000;
  auto* eval = app.add_subcommand("eval", "Evaluate a model on the test carve");
  add_corpus_args(eval, ca, true);
  eval->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--symbol", symbol, "New symbol")->required();
  eval->add_option("--triggers", triggers, "\"bundled\", a trigger-set JSON file, or \"none\"");
  eval->add_option("--resamples", resamples, "Bootstrap resamples");
  eval->add_option("--seed", seed, "Bootstrap seed");
  eval->add_option("--out", out, "Metrics JSON");

  // sweep
  std::string manifest_path;
  std::optional<std::uint64_t> sweep_seed;
  auto* sweep = app.add_subcommand("sweep", "Run every cell of a manifest");
  sweep->add_option("manifest", manifest_path, "Manifest JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--seed", sweep_seed, "Run this seed only");
  sweep->add_option("--out", out, "Output directory (overrides the manifest)");
  sweep->add_option("--workers", workers, "Concurrent cells (overrides the manifest)")
      ->check(CLI::PositiveNumber);

  // report
  std::string results_path;
  std::string kind = "all";
  auto* report = app.add_subcommand("report", "Write figure-shaped CSV tables from sweep rows");
  report->add_option("results", results_path, "results.csv")->required()->check(CLI::ExistingFile);
  report->add_option("--kind", kind, "accuracy | strength | competing | all");
  report->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const isl::Corpus c = load(ca);
      std::cout << "examples\t" << c.size() << "\n";
      for (const auto& [s, n] : c.symbol_inventory()) std::cout << s << "\t" << n << "\n";
      if (!out.empty()) isl::write_corpus(c, out);
    } else if (*synth) {
      json j = read_json(synth_spec);
      const json& body = j.contains("synth") ? j["synth"] : j;
      isl::SynthSpec spec = isl::synth_spec_from_json(body);
      if (synth->count("--seed") > 0) spec.seed = seed;
      std::map<std::string, std::size_t> counts;
      for (const isl::SynthSymbol& s : spec.symbols) {
        if (n_per_symbol > 0) {
          counts[s.name] = n_per_symbol;
        } else if (body.contains("n_per_symbol")) {
          const json& n = body["n_per_symbol"];
          counts[s.name] = n.is_number() ? n.get<std::size_t>() : n.at(s.name).get<std::size_t>();
        } else {
          throw isl::Error("no example count: pass --n-per-symbol or set n_per_symbol");
        }
      }
      isl::write_corpus(isl::generate_corpus(spec, counts), out);
    } else if (*split) {
      const isl::Corpus c = load(ca);
      const isl::EvalCarve e = carve(c, ca);
      std::size_t n = 0;
      if (n_text == "max") {
        n = isl::max_setting_size(c, e.train_pool, symbol, k);
      } else {
        try {
          n = std::stoul(n_text);
        } catch (const std::exception&) {
          throw isl::Error("-N expects an integer or \"max\"");
        }
      }
      std::ostringstream src;
      src << std::hex << std::setw(16) << std::setfill('0') << c.digest();
      const isl::Split s = isl::make_split(c, e.train_pool, {symbol, k, n, seed, src.str()});
      emit(out, split_text(c, s));
    } else if (*signal) {
      const isl::Corpus c = load(ca);
      const isl::Split s = load_split(c, split_path);
      const isl::TriggerSet t = resolve_triggers(triggers, s.spec.new_symbol);
      emit(out, isl::signal_csv_header() + "\n" + isl::signal_csv_row(isl::signal_report(c, s, t)) + "\n");
    } else if (*dilute) {
      const isl::Corpus c = load(ca);
      const isl::EvalCarve e = carve(c, ca);
      const isl::Split s = load_split(c, split_path);
      const isl::TriggerSet t = resolve_triggers(triggers, s.spec.new_symbol);
      std::vector<char> used(c.size(), 0);
      for (const isl::SplitEntry& en : s.entries) used[en.index] = 1;
      isl::IndexList pool;
      for (std::size_t i : e.train_pool) {
        if (!used[i]) pool.push_back(i);
      }
      isl::DilutionOptions opts;
      opts.allow_deficit = allow_deficit;
      opts.target_strength = target_strength;
      emit(out, split_text(c, isl::remove_dilution(c, s, t, pool, opts)));
    } else if (*upsample) {
      const isl::Corpus c = load(ca);
      const isl::Split s = load_split(c, split_path);
      isl::Split r;
      if (mode == "fixed") {
        r = isl::upsample_fixed(c, s, s.spec.new_symbol, ratio);
      } else {
        isl::Ratio br{s.spec.k, s.spec.total};
        if (!base_ratio.empty()) {
          const auto slash = base_ratio.find('/');
          if (slash == std::string::npos) throw isl::Error("--base-ratio expects num/den");
          br = {std::stoull(base_ratio.substr(0, slash)), std::stoull(base_ratio.substr(slash + 1))};
        }
        r = isl::upsample_adaptive(c, s, s.spec.new_symbol, br);
      }
      emit(out, split_text(c, r));
    } else if (*train) {
      const isl::Corpus c = load(ca);
      const isl::EvalCarve e = carve(c, ca);
      const isl::Split s = load_split(c, split_path);
      isl::TrainConfig cfg;
      isl::FeatureConfig features;
      if (!config_path.empty()) {
        const json j = read_json(config_path);
        if (j.contains("trainer")) cfg = isl::train_config_from_json(j["trainer"]);
        if (j.contains("features")) features = isl::feature_config_from_json(j["features"]);
      }
      cfg.seed = seed;
      cfg.new_symbol = s.spec.new_symbol;
      if (c.task_kind() == isl::TaskKind::symbol_set) cfg.grouping = isl::Grouping::contains_symbol;
      if (dro) cfg.objective = isl::Objective::group_dro;
      isl::save_model(isl::train(c, s, e.dev, cfg, features), out);
    } else if (*eval) {
      const isl::Corpus c = load(ca);
      const isl::EvalCarve e = carve(c, ca);
      const isl::ModelState model = isl::load_model(model_path);
      std::optional<isl::TriggerSet> t;
      if (triggers != "none") t = resolve_triggers(triggers, symbol);
      isl::BootstrapConfig boot;
      boot.resamples = resamples;
      boot.seed = seed;
      emit(out, to_json(isl::evaluate(model, c, e.test, symbol, t, boot)).dump(2) + "\n");
    } else if (*sweep) {
      isl::Manifest m = isl::load_manifest(manifest_path);
      if (!out.empty()) m.output_dir = out;
      if (workers > 0) m.workers = workers;
      if (sweep_seed) m.seeds = {*sweep_seed};
      const isl::SweepResult r = isl::run_sweep(m);
      std::cerr << r.cells_computed << " computed, " << r.cells_resumed << " resumed, "
                << r.failures.size() << " failed\n";
      for (const isl::CellFailure& f : r.failures) {
        std::cerr << "  " << f.symbol << " N=" << f.n << " " << f.setting << " seed=" << f.seed
                  << ": " << f.reason << "\n";
      }
      return r.failures.empty() ? 0 : 1;
    } else if (*report) {
      std::ifstream in(results_path, std::ios::binary);
      std::stringstream buf;
      buf << in.rdbuf();
      const std::vector<isl::ResultRow> rows = isl::read_rows_csv(buf.str());
      const std::vector<std::string> kinds =
          kind == "all" ? isl::report_kinds() : std::vector<std::string>{kind};
      for (const std::string& kd : kinds) std::cout << isl::report(rows, kd, out).string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
