#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "isl/error.hpp"
#include "isl/sweep.hpp"

namespace isl {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

namespace {

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw Error("bad number '" + s + "' in CSV");
  return v;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

std::size_t parse_size(const std::string& s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw Error("bad count '" + s + "' in CSV");
  return v;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

template <typename Row>
std::string join_row(const Row& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) line += ',';
    line += csv_field(fields[i]);
  }
  return line + "\n";
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string rows_csv_header() {
  return "symbol,N,setting,seed,overall_acc,new_symbol_acc,competing_acc,strength,coverage,"
         "imbalance,n_train,n_test_new,n_test_competing,new_ci_low,new_ci_high,wall_time_s";
}

std::string write_rows_csv(const std::vector<ResultRow>& rows) {
  std::string out = rows_csv_header() + "\n";
  for (const ResultRow& r : rows) {
    const std::vector<std::string> fields = {
        r.symbol,
        std::to_string(r.n),
        r.setting,
        r.seed,
        format_double(r.overall_acc),
        fmt_opt(r.new_symbol_acc),
        fmt_opt(r.competing_acc),
        fmt_opt(r.strength),
        fmt_opt(r.coverage),
        format_double(r.imbalance),
        std::to_string(r.n_train),
        std::to_string(r.n_test_new),
        std::to_string(r.n_test_competing),
        fmt_opt(r.new_ci_low),
        fmt_opt(r.new_ci_high),
        format_double(r.wall_time_s),
    };
    out += join_row(fields);
  }
  return out;
}

std::vector<ResultRow> read_rows_csv(const std::string& text) {
  const auto table = parse_csv(text);
  if (table.empty()) throw Error("results CSV is empty");
  std::string header;
  for (std::size_t i = 0; i < table[0].size(); ++i) header += (i ? "," : "") + table[0][i];
  if (header != rows_csv_header()) throw Error("results CSV has an unexpected header");
  std::vector<ResultRow> rows;
  for (std::size_t li = 1; li < table.size(); ++li) {
    const auto& f = table[li];
    if (f.size() != 16) throw Error("results CSV line " + std::to_string(li + 1) + ": wrong field count");
    ResultRow r;
    r.symbol = f[0];
    r.n = parse_size(f[1]);
    r.setting = f[2];
    r.seed = f[3];
    r.overall_acc = parse_double(f[4]);
    r.new_symbol_acc = parse_opt(f[5]);
    r.competing_acc = parse_opt(f[6]);
    r.strength = parse_opt(f[7]);
    r.coverage = parse_opt(f[8]);
    r.imbalance = parse_double(f[9]);
    r.n_train = parse_size(f[10]);
    r.n_test_new = parse_size(f[11]);
    r.n_test_competing = parse_size(f[12]);
    r.new_ci_low = parse_opt(f[13]);
    r.new_ci_high = parse_opt(f[14]);
    r.wall_time_s = parse_double(f[15]);
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::ordered_json to_json(const ResultRow& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["symbol"] = r.symbol;
  j["N"] = r.n;
  j["setting"] = r.setting;
  j["seed"] = r.seed;
  j["overall_acc"] = r.overall_acc;
  j["new_symbol_acc"] = opt(r.new_symbol_acc);
  j["competing_acc"] = opt(r.competing_acc);
  j["strength"] = opt(r.strength);
  j["coverage"] = opt(r.coverage);
  j["imbalance"] = r.imbalance;
  j["n_train"] = r.n_train;
  j["n_test_new"] = r.n_test_new;
  j["n_test_competing"] = r.n_test_competing;
  j["new_ci_low"] = opt(r.new_ci_low);
  j["new_ci_high"] = opt(r.new_ci_high);
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

ResultRow row_from_json(const nlohmann::json& j) {
  auto opt = [&j](const char* key) -> std::optional<double> {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  ResultRow r;
  r.symbol = j.at("symbol").get<std::string>();
  r.n = j.at("N").get<std::size_t>();
  r.setting = j.at("setting").get<std::string>();
  r.seed = j.at("seed").get<std::string>();
  r.overall_acc = j.at("overall_acc").get<double>();
  r.new_symbol_acc = opt("new_symbol_acc");
  r.competing_acc = opt("competing_acc");
  r.strength = opt("strength");
  r.coverage = opt("coverage");
  r.imbalance = j.at("imbalance").get<double>();
  r.n_train = j.at("n_train").get<std::size_t>();
  r.n_test_new = j.at("n_test_new").get<std::size_t>();
  r.n_test_competing = j.at("n_test_competing").get<std::size_t>();
  r.new_ci_low = opt("new_ci_low");
  r.new_ci_high = opt("new_ci_high");
  r.wall_time_s = j.at("wall_time_s").get<double>();
  return r;
}

const std::vector<std::string>& report_kinds() {
  static const std::vector<std::string> kinds = {"accuracy", "strength", "competing"};
  return kinds;
}

std::string report_csv(const std::vector<ResultRow>& rows, const std::string& kind) {
  const auto& kinds = report_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    throw Error("unknown report kind '" + kind + "' (valid: accuracy, strength, competing)");
  }
  if (rows.empty()) throw Error("report: no rows");
  const std::vector<ResultRow> summary = summarize(rows);

  std::vector<std::string> settings;
  std::vector<std::pair<std::string, std::size_t>> cells;
  for (const ResultRow& r : summary) {
    if (std::find(settings.begin(), settings.end(), r.setting) == settings.end()) {
      settings.push_back(r.setting);
    }
    const std::pair<std::string, std::size_t> key{r.symbol, r.n};
    if (std::find(cells.begin(), cells.end(), key) == cells.end()) cells.push_back(key);
  }
  std::sort(cells.begin(), cells.end());
  auto find = [&summary](const std::string& sym, std::size_t n,
                         const std::string& setting) -> const ResultRow* {
    for (const ResultRow& r : summary) {
      if (r.symbol == sym && r.n == n && r.setting == setting) return &r;
    }
    return nullptr;
  };

  std::string out;
  if (kind == "strength") {
    const std::string setting =
        std::find(settings.begin(), settings.end(), "baseline") != settings.end() ? "baseline"
                                                                                  : settings.front();
    out = "symbol,N,strength\n";
    for (const auto& [sym, n] : cells) {
      const ResultRow* r = find(sym, n, setting);
      if (r == nullptr) continue;
      out += join_row(std::vector<std::string>{sym, std::to_string(n), fmt_opt(r->strength)});
    }
  } else if (kind == "accuracy") {
    std::vector<std::string> header = {"symbol", "N"};
    for (const std::string& s : settings) {
      header.push_back(s);
      header.push_back(s + "_ci_low");
      header.push_back(s + "_ci_high");
    }
    out = join_row(header);
    for (const auto& [sym, n] : cells) {
      std::vector<std::string> line = {sym, std::to_string(n)};
      for (const std::string& s : settings) {
        const ResultRow* r = find(sym, n, s);
        line.push_back(r ? fmt_opt(r->new_symbol_acc) : "");
        line.push_back(r ? fmt_opt(r->new_ci_low) : "");
        line.push_back(r ? fmt_opt(r->new_ci_high) : "");
      }
      out += join_row(line);
    }
  } else {
    out = "symbol,N,setting,competing_acc,n_competing\n";
    for (const auto& [sym, n] : cells) {
      for (const std::string& s : settings) {
        const ResultRow* r = find(sym, n, s);
        if (r == nullptr) continue;
        out += join_row(std::vector<std::string>{sym, std::to_string(n), s, fmt_opt(r->competing_acc),
                                                 std::to_string(r->n_test_competing)});
      }
    }
  }
  return out;
}

std::filesystem::path report(const std::vector<ResultRow>& rows, const std::string& kind,
                             const std::filesystem::path& out_dir) {
  const std::string csv = report_csv(rows, kind);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path path = out_dir / (kind + ".csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << csv;
  return path;
}

}  // namespace isl
