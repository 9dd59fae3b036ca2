#include <fstream>
#include <sstream>

#include "isl/error.hpp"
#include "isl/sweep.hpp"

namespace isl {

Setting parse_setting(const std::string& text) {
  Setting s;
  s.name = text;
  std::stringstream parts(text);
  std::string part;
  bool any = false;
  while (std::getline(parts, part, '+')) {
    any = true;
    if (part == "baseline") {
      continue;
    } else if (part == "no-dilution") {
      s.no_dilution = true;
    } else if (part == "dro") {
      s.dro = true;
    } else if (part == "upsample-adaptive") {
      s.adaptive = true;
    } else if (part.rfind("upsample-fixed", 0) == 0) {
      std::size_t ratio = 32;
      if (part.size() > 14) {
        if (part[14] != ':') throw Error("malformed setting '" + part + "'");
        try {
          ratio = std::stoul(part.substr(15));
        } catch (const std::exception&) {
          throw Error("malformed upsampling ratio in '" + part + "'");
        }
      }
      if (ratio < 1) throw Error("upsampling ratio must be >= 1");
      s.fixed_ratio = ratio;
    } else {
      throw Error("unknown setting '" + part +
                  "' (expected baseline|no-dilution|dro|upsample-fixed[:R]|upsample-adaptive)");
    }
  }
  if (!any) throw Error("empty setting");
  if (s.fixed_ratio && s.adaptive) throw Error("setting '" + text + "' mixes both upsampling kinds");
  return s;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

TriggerSource parse_triggers(const nlohmann::json& j, const std::filesystem::path& base) {
  TriggerSource t;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "bundled") {
      t.kind = TriggerSource::Kind::bundled;
    } else if (s == "synth") {
      t.kind = TriggerSource::Kind::synth;
    } else {
      std::ifstream in(resolve(base, s));
      if (!in) throw Error("cannot open trigger file '" + s + "'");
      t.kind = TriggerSource::Kind::inline_sets;
      t.sets = trigger_sets_from_json(nlohmann::json::parse(in));
    }
  } else if (j.is_object() && j.contains("mine")) {
    t.kind = TriggerSource::Kind::mined;
    t.mine_min_count = j["mine"].value("min_count", t.mine_min_count);
    t.mine_top_k = j["mine"].value("top_k", t.mine_top_k);
  } else {
    t.kind = TriggerSource::Kind::inline_sets;
    t.sets = trigger_sets_from_json(j);
  }
  return t;
}

}  // namespace

Manifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  Manifest m;
  const auto& corpus = j.at("corpus");
  if (corpus.contains("synth")) {
    const auto& js = corpus.at("synth");
    m.synth = synth_spec_from_json(js);
    m.task_kind = TaskKind::single_label;
    const auto& counts = js.at("n_per_symbol");
    for (const SynthSymbol& s : m.synth->symbols) {
      m.synth_counts[s.name] =
          counts.is_number() ? counts.get<std::size_t>() : counts.at(s.name).get<std::size_t>();
    }
  } else {
    m.corpus_path = resolve(base_dir, corpus.at("path").get<std::string>());
    m.task_kind = parse_task_kind(corpus.value("task_kind", std::string("intent")));
  }

  if (j.contains("eval")) {
    const auto& e = j["eval"];
    m.dev_fraction = e.value("dev_fraction", m.dev_fraction);
    m.test_fraction = e.value("test_fraction", m.test_fraction);
    m.carve_seed = e.value("seed", m.carve_seed);
  }
  m.symbols = j.at("symbols").get<std::vector<std::string>>();
  if (m.symbols.empty()) throw Error("manifest: no symbols under study");
  m.k = j.value("k", m.k);

  if (j.contains("n_grid")) {
    for (const auto& n : j["n_grid"]) {
      if (n.is_string()) {
        if (n.get<std::string>() != "max") throw Error("manifest: n_grid entries are integers or \"max\"");
        m.n_grid.emplace_back(std::nullopt);
      } else {
        m.n_grid.emplace_back(n.get<std::size_t>());
      }
    }
  } else if (m.task_kind == TaskKind::single_label) {
    for (std::size_t n : {750, 1500, 3000, 7500, 15000, 18000}) m.n_grid.emplace_back(n);
  } else {
    for (std::size_t n : {5000, 10000, 20000, 50000, 100000}) m.n_grid.emplace_back(n);
    m.n_grid.emplace_back(std::nullopt);
  }
  if (m.n_grid.empty()) throw Error("manifest: empty n_grid");

  for (const auto& s : j.value("settings", nlohmann::json::array({"baseline"}))) {
    m.settings.push_back(parse_setting(s.get<std::string>()));
  }
  if (m.settings.empty()) throw Error("manifest: no settings");
  if (j.contains("seeds")) m.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (m.seeds.empty()) throw Error("manifest: no seeds");

  if (j.contains("triggers")) {
    m.triggers = parse_triggers(j["triggers"], base_dir);
  } else {
    m.triggers.kind = m.synth ? TriggerSource::Kind::synth : TriggerSource::Kind::bundled;
  }
  if (m.triggers.kind == TriggerSource::Kind::synth && !m.synth) {
    throw Error("manifest: synth triggers need a synthetic corpus");
  }

  if (j.contains("trainer")) m.trainer = train_config_from_json(j["trainer"]);
  if (j.contains("features")) m.features = feature_config_from_json(j["features"]);
  if (j.contains("bootstrap")) {
    m.bootstrap.resamples = j["bootstrap"].value("resamples", m.bootstrap.resamples);
    m.bootstrap.level = j["bootstrap"].value("level", m.bootstrap.level);
    if (m.bootstrap.resamples < 100) throw Error("manifest: bootstrap.resamples must be >= 100");
    if (!(m.bootstrap.level > 0.0 && m.bootstrap.level < 1.0)) {
      throw Error("manifest: bootstrap.level must be in (0, 1)");
    }
  }
  m.output_dir = resolve(base_dir, j.value("output_dir", m.output_dir.string()));
  m.workers = j.value("workers", m.workers);
  if (m.workers < 1) throw Error("manifest: workers must be >= 1");
  m.save_artifacts = j.value("save_artifacts", m.save_artifacts);
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("manifest '" + path.string() + "': " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

nlohmann::ordered_json to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json corpus;
  if (m.synth) {
    nlohmann::ordered_json s = to_json(*m.synth);
    s["n_per_symbol"] = m.synth_counts;
    corpus["synth"] = std::move(s);
  } else {
    corpus["path"] = m.corpus_path ? m.corpus_path->string() : std::string();
    corpus["task_kind"] = std::string(to_string(m.task_kind));
  }
  j["corpus"] = std::move(corpus);
  j["eval"] = {{"dev_fraction", m.dev_fraction}, {"test_fraction", m.test_fraction},
               {"seed", m.carve_seed}};
  j["symbols"] = m.symbols;
  j["k"] = m.k;
  auto grid = nlohmann::ordered_json::array();
  for (const auto& n : m.n_grid) {
    grid.push_back(n ? nlohmann::ordered_json(*n) : nlohmann::ordered_json("max"));
  }
  j["n_grid"] = std::move(grid);
  auto settings = nlohmann::ordered_json::array();
  for (const Setting& s : m.settings) settings.push_back(s.name);
  j["settings"] = std::move(settings);
  j["seeds"] = m.seeds;
  switch (m.triggers.kind) {
    case TriggerSource::Kind::bundled:
      j["triggers"] = "bundled";
      break;
    case TriggerSource::Kind::synth:
      j["triggers"] = "synth";
      break;
    case TriggerSource::Kind::mined:
      j["triggers"] = {{"mine", {{"min_count", m.triggers.mine_min_count},
                                 {"top_k", m.triggers.mine_top_k}}}};
      break;
    case TriggerSource::Kind::inline_sets: {
      auto sets = nlohmann::ordered_json::array();
      for (const TriggerSet& t : m.triggers.sets) sets.push_back(to_json(t));
      j["triggers"] = std::move(sets);
      break;
    }
  }
  j["trainer"] = to_json(m.trainer);
  j["features"] = to_json(m.features);
  j["bootstrap"] = {{"resamples", m.bootstrap.resamples}, {"level", m.bootstrap.level}};
  j["output_dir"] = m.output_dir.string();
  j["workers"] = m.workers;
  j["save_artifacts"] = m.save_artifacts;
  return j;
}

}  // namespace isl
