#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "isl/error.hpp"
#include "isl/random.hpp"
#include "isl/sampling.hpp"
#include "isl/splits.hpp"
#include "isl/sweep.hpp"

namespace isl {

Corpus materialize_corpus(const Manifest& m) {
  if (m.synth) return generate_corpus(*m.synth, m.synth_counts);
  if (!m.corpus_path) throw Error("manifest names no corpus");
  return load_corpus(*m.corpus_path, m.task_kind);
}

namespace {

struct Cell {
  std::size_t symbol_idx = 0;
  std::size_t n_idx = 0;
  std::size_t setting_idx = 0;
  std::size_t seed_idx = 0;
  std::size_t n = 0;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

class SweepRunner {
 public:
  explicit SweepRunner(const Manifest& m) : m_(m), corpus_(materialize_corpus(m)) {
    carve_ = carve_eval(corpus_, m.dev_fraction, m.test_fraction, m.carve_seed);
    source_ = hex64(corpus_.digest());
    resolve_grid();
    validate();
  }

  SweepResult run() {
    std::filesystem::create_directories(m_.output_dir / "cells");
    std::vector<Cell> cells;
    for (std::size_t si = 0; si < m_.symbols.size(); ++si) {
      for (std::size_t ni = 0; ni < grid_[si].size(); ++ni) {
        for (std::size_t gi = 0; gi < m_.settings.size(); ++gi) {
          for (std::size_t ei = 0; ei < m_.seeds.size(); ++ei) {
            cells.push_back({si, ni, gi, ei, grid_[si][ni]});
          }
        }
      }
    }

    std::vector<std::optional<ResultRow>> rows(cells.size());
    std::vector<std::optional<std::string>> errors(cells.size());
    std::vector<char> resumed(cells.size(), 0);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        try {
          bool was_resumed = false;
          rows[i] = run_cell(cells[i], was_resumed);
          resumed[i] = was_resumed ? 1 : 0;
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    };
    const auto n_workers = static_cast<std::size_t>(std::max(1, m_.workers));
    if (n_workers == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < std::min(n_workers, cells.size()); ++w) pool.emplace_back(worker);
    }

    SweepResult result;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (rows[i]) {
        result.rows.push_back(*rows[i]);
        (resumed[i] ? result.cells_resumed : result.cells_computed)++;
      } else {
        const Cell& c = cells[i];
        result.failures.push_back({m_.symbols[c.symbol_idx], c.n, m_.settings[c.setting_idx].name,
                                   m_.seeds[c.seed_idx], errors[i].value_or("unknown error")});
      }
    }
    result.summary = summarize(result.rows);

    write_file_atomic(m_.output_dir / "manifest.resolved.json", to_json(m_).dump(2) + "\n");
    write_file_atomic(m_.output_dir / "results.csv", write_rows_csv(result.rows));
    write_file_atomic(m_.output_dir / "summary.csv", write_rows_csv(result.summary));
    const auto failures_path = m_.output_dir / "failures.csv";
    if (result.failures.empty()) {
      std::filesystem::remove(failures_path);
    } else {
      std::ostringstream os;
      os << "symbol,N,setting,seed,reason\n";
      for (const CellFailure& f : result.failures) {
        std::string reason = f.reason;
        std::replace(reason.begin(), reason.end(), '"', '\'');
        os << f.symbol << ',' << f.n << ',' << f.setting << ',' << f.seed << ",\"" << reason << "\"\n";
      }
      write_file_atomic(failures_path, os.str());
    }
    return result;
  }

 private:
  void resolve_grid() {
    grid_.resize(m_.symbols.size());
    for (std::size_t si = 0; si < m_.symbols.size(); ++si) {
      const std::size_t bound = max_setting_size(corpus_, carve_.train_pool, m_.symbols[si], m_.k);
      for (const auto& n : m_.n_grid) {
        const std::size_t value = n ? *n : bound;
        if (value > bound) {
          throw Error("manifest: N=" + std::to_string(value) + " exceeds max_setting_size=" +
                      std::to_string(bound) + " for '" + m_.symbols[si] + "'");
        }
        if (value < m_.k) throw Error("manifest: N=" + std::to_string(value) + " is below k");
        grid_[si].push_back(value);
      }
    }
  }

  void validate() {
    for (const std::string& sym : m_.symbols) {
      if (corpus_.symbol_inventory().count(sym) == 0) {
        throw Error("manifest: symbol '" + sym + "' does not occur in the corpus");
      }
      const bool needs_triggers = std::any_of(m_.settings.begin(), m_.settings.end(),
                                              [](const Setting& s) { return s.no_dilution; });
      if (needs_triggers && m_.triggers.kind != TriggerSource::Kind::mined &&
          !fixed_triggers(sym)) {
        throw Error("manifest: no trigger set for '" + sym + "' (needed by no-dilution)");
      }
    }
  }

  std::optional<TriggerSet> fixed_triggers(const std::string& sym) const {
    switch (m_.triggers.kind) {
      case TriggerSource::Kind::bundled:
        return find_trigger_set(bundled_trigger_sets(), sym);
      case TriggerSource::Kind::inline_sets:
        return find_trigger_set(m_.triggers.sets, sym);
      case TriggerSource::Kind::synth: {
        const SynthSymbol& s = m_.synth->symbol(sym);
        return TriggerSet{s.name, s.triggers, TriggerOrigin::manual};
      }
      case TriggerSource::Kind::mined:
        return std::nullopt;
    }
    return std::nullopt;
  }

  /// Mined triggers come from the smallest-N baseline split of the same seed.
  std::optional<TriggerSet> triggers_for(std::size_t symbol_idx, std::uint64_t seed) const {
    const std::string& sym = m_.symbols[symbol_idx];
    if (m_.triggers.kind != TriggerSource::Kind::mined) return fixed_triggers(sym);
    const std::size_t n_min = *std::min_element(grid_[symbol_idx].begin(), grid_[symbol_idx].end());
    const Split base = make_split(corpus_, carve_.train_pool, {sym, m_.k, n_min, seed, source_});
    const auto mined =
        mine_triggers(corpus_, base, sym, m_.triggers.mine_min_count, m_.triggers.mine_top_k);
    if (mined.empty()) return std::nullopt;
    TriggerSet t{sym, {}, TriggerOrigin::mined};
    for (const MinedToken& tok : mined) t.tokens.push_back(tok.token);
    return t;
  }

  std::string cell_key(const Cell& c, const std::optional<TriggerSet>& triggers) const {
    nlohmann::ordered_json j;
    j["code_version"] = kCodeVersion;
    j["corpus"] = source_;
    j["carve"] = {m_.dev_fraction, m_.test_fraction, m_.carve_seed};
    j["symbol"] = m_.symbols[c.symbol_idx];
    j["k"] = m_.k;
    j["N"] = c.n;
    j["N_min"] = *std::min_element(grid_[c.symbol_idx].begin(), grid_[c.symbol_idx].end());
    j["setting"] = m_.settings[c.setting_idx].name;
    j["seed"] = m_.seeds[c.seed_idx];
    j["trainer"] = to_json(m_.trainer);
    j["features"] = to_json(m_.features);
    j["bootstrap"] = {m_.bootstrap.resamples, m_.bootstrap.level};
    j["triggers"] = triggers ? to_json(*triggers) : nlohmann::ordered_json(nullptr);
    return hex64(fnv1a64(j.dump()));
  }

  ResultRow run_cell(const Cell& c, bool& was_resumed) const {
    const std::string& sym = m_.symbols[c.symbol_idx];
    const Setting& setting = m_.settings[c.setting_idx];
    const std::uint64_t seed = m_.seeds[c.seed_idx];
    const std::optional<TriggerSet> triggers = triggers_for(c.symbol_idx, seed);

    const std::filesystem::path dir = m_.output_dir / "cells" / cell_key(c, triggers);
    const std::filesystem::path row_path = dir / "row.json";
    if (std::filesystem::exists(row_path)) {
      std::ifstream in(row_path);
      try {
        ResultRow row = row_from_json(nlohmann::json::parse(in));
        was_resumed = true;
        return row;
      } catch (const std::exception&) {
        // Unreadable artifact: recompute.
      }
    }
    was_resumed = false;
    const auto started = std::chrono::steady_clock::now();

    Split split = make_split(corpus_, carve_.train_pool, {sym, m_.k, c.n, seed, source_});
    if (setting.no_dilution) {
      if (!triggers) throw Error("no trigger set for '" + sym + "'");
      std::set<std::size_t> used;
      for (const SplitEntry& e : split.entries) used.insert(e.index);
      IndexList backfill;
      for (std::size_t i : carve_.train_pool) {
        if (used.count(i) == 0) backfill.push_back(i);
      }
      DilutionOptions opts;
      opts.allow_deficit = true;
      split = remove_dilution(corpus_, split, *triggers, backfill, opts);
    }
    if (setting.fixed_ratio) split = upsample_fixed(corpus_, split, sym, *setting.fixed_ratio);
    if (setting.adaptive) {
      const std::size_t n_min =
          *std::min_element(grid_[c.symbol_idx].begin(), grid_[c.symbol_idx].end());
      split = upsample_adaptive(corpus_, split, sym, Ratio{m_.k, n_min});
    }

    TrainConfig cfg = m_.trainer;
    cfg.seed = seed;
    cfg.new_symbol = sym;
    if (setting.dro) {
      cfg.objective = Objective::group_dro;
      cfg.grouping = corpus_.task_kind() == TaskKind::single_label ? Grouping::per_symbol
                                                                   : Grouping::contains_symbol;
    } else if (corpus_.task_kind() == TaskKind::symbol_set) {
      cfg.grouping = Grouping::contains_symbol;
    }
    const ModelState model = train(corpus_, split, carve_.dev, cfg, m_.features);
    BootstrapConfig boot = m_.bootstrap;
    boot.seed = seed;
    const MetricReport metrics = evaluate(model, corpus_, carve_.test, sym, triggers, boot);

    ResultRow row;
    row.symbol = sym;
    row.n = c.n;
    row.setting = setting.name;
    row.seed = std::to_string(seed);
    row.overall_acc = metrics.overall_acc;
    row.new_symbol_acc = metrics.new_symbol_acc;
    row.competing_acc = metrics.competing_acc;
    row.n_test_new = metrics.n_new_symbol;
    row.n_test_competing = metrics.n_competing;
    if (auto it = metrics.ci.find("new_symbol"); it != metrics.ci.end()) {
      row.new_ci_low = it->second.low;
      row.new_ci_high = it->second.high;
    }
    const SplitStats stats = split_stats(corpus_, split);
    row.imbalance = stats.imbalance;
    row.n_train = stats.total;
    if (triggers) {
      const SignalReport sig = signal_report(corpus_, split, *triggers);
      row.strength = sig.strength;
      row.coverage = sig.coverage;
    }
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    std::filesystem::create_directories(dir);
    if (m_.save_artifacts) {
      write_file_atomic(dir / "split.json", to_json(corpus_, split).dump() + "\n");
      write_file_atomic(dir / "model.json", to_json(model).dump() + "\n");
      write_file_atomic(dir / "metrics.json", to_json(metrics).dump(2) + "\n");
    }
    write_file_atomic(row_path, to_json(row).dump(2) + "\n");
    return row;
  }

  const Manifest& m_;
  Corpus corpus_;
  EvalCarve carve_;
  std::string source_;
  std::vector<std::vector<std::size_t>> grid_;
};

}  // namespace

SweepResult run_sweep(const Manifest& manifest) { return SweepRunner(manifest).run(); }

std::vector<ResultRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<ResultRow> out;
  std::vector<std::vector<const ResultRow*>> groups;
  for (const ResultRow& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&r](const ResultRow& s) {
      return s.symbol == r.symbol && s.n == r.n && s.setting == r.setting;
    });
    if (it == out.end()) {
      ResultRow head;
      head.symbol = r.symbol;
      head.n = r.n;
      head.setting = r.setting;
      head.seed = "mean";
      out.push_back(head);
      groups.push_back({&r});
    } else {
      groups[static_cast<std::size_t>(it - out.begin())].push_back(&r);
    }
  }
  auto mean = [](const std::vector<const ResultRow*>& g, auto field) {
    double s = 0.0;
    for (const ResultRow* r : g) s += static_cast<double>(field(*r));
    return s / static_cast<double>(g.size());
  };
  auto mean_opt = [](const std::vector<const ResultRow*>& g,
                     auto field) -> std::optional<double> {
    double s = 0.0;
    for (const ResultRow* r : g) {
      const std::optional<double> v = field(*r);
      if (!v) return std::nullopt;
      s += *v;
    }
    return s / static_cast<double>(g.size());
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& g = groups[i];
    ResultRow& s = out[i];
    s.overall_acc = mean(g, [](const ResultRow& r) { return r.overall_acc; });
    s.new_symbol_acc = mean_opt(g, [](const ResultRow& r) { return r.new_symbol_acc; });
    s.competing_acc = mean_opt(g, [](const ResultRow& r) { return r.competing_acc; });
    s.strength = mean_opt(g, [](const ResultRow& r) { return r.strength; });
    s.coverage = mean_opt(g, [](const ResultRow& r) { return r.coverage; });
    s.imbalance = mean(g, [](const ResultRow& r) { return r.imbalance; });
    // Counts of a summary row are rounded seed means.
    s.n_train = static_cast<std::size_t>(
        std::llround(mean(g, [](const ResultRow& r) { return r.n_train; })));
    s.n_test_new = g.front()->n_test_new;
    s.n_test_competing = g.front()->n_test_competing;
    s.new_ci_low = mean_opt(g, [](const ResultRow& r) { return r.new_ci_low; });
    s.new_ci_high = mean_opt(g, [](const ResultRow& r) { return r.new_ci_high; });
    s.wall_time_s = mean(g, [](const ResultRow& r) { return r.wall_time_s; });
  }
  return out;
}

}  // namespace isl
