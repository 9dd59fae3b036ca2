#include "isl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "isl/error.hpp"
#include "isl/random.hpp"

namespace isl {

using ojson = nlohmann::ordered_json;

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::single_label ? "intent" : "program";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "intent" || name == "single-label" || name == "single_label") {
    return TaskKind::single_label;
  }
  if (name == "program" || name == "symbol-set" || name == "symbol_set") {
    return TaskKind::symbol_set;
  }
  throw Error("unknown task kind '" + std::string(name) + "' (expected intent|program)");
}

Output Output::intent(std::string label) {
  Output out;
  out.kind = TaskKind::single_label;
  out.symbols = {label};
  out.label = std::move(label);
  return out;
}

Output Output::program(std::string lisp) {
  Output out;
  out.kind = TaskKind::symbol_set;
  out.symbols = extract_symbols(lisp);
  out.lisp = std::move(lisp);
  return out;
}

bool Output::contains(std::string_view symbol) const {
  return std::binary_search(symbols.begin(), symbols.end(), symbol,
                            [](std::string_view a, std::string_view b) { return a < b; });
}

Example make_example(std::string id, std::vector<Turn> context, std::string utterance,
                     Output output) {
  Example ex;
  ex.tokens = build_example_tokens(context, utterance);
  ex.id = std::move(id);
  ex.context = std::move(context);
  ex.utterance = std::move(utterance);
  ex.output = std::move(output);
  return ex;
}

Corpus::Corpus(std::vector<Example> examples, TaskKind kind)
    : examples_(std::move(examples)), kind_(kind) {
  by_id_.reserve(examples_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const Example& ex = examples_[i];
    if (!by_id_.emplace(ex.id, i).second) {
      throw ParseError("duplicate example id '" + ex.id + "'", i + 1);
    }
    if (ex.tokens.empty()) throw ParseError("example '" + ex.id + "' has no tokens", i + 1);
    if (ex.output.kind != kind_) {
      throw ParseError("example '" + ex.id + "' output kind does not match corpus task kind",
                       i + 1);
    }
    if (ex.output.symbols.empty()) {
      throw ParseError("example '" + ex.id + "' has an empty symbol set", i + 1);
    }
    for (const std::string& s : ex.output.symbols) ++inventory_[s];
  }
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::index_of(std::string_view id) const {
  auto found = find(id);
  if (!found) throw Error("unknown example id '" + std::string(id) + "'");
  return *found;
}

std::uint64_t Corpus::digest() const {
  std::uint64_t h = fnv1a64(to_string(kind_));
  for (const Example& ex : examples_) {
    h = fnv1a64(serialize_example(ex), h);
    h = fnv1a64("\n", h);
  }
  return h;
}

namespace {

Example parse_record(const std::string& line, std::size_t line_no, TaskKind kind) {
  auto fail = [line_no](const std::string& msg) -> ParseError {
    return ParseError("line " + std::to_string(line_no) + ": " + msg, line_no);
  };
  ojson rec;
  try {
    rec = ojson::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw fail(std::string("invalid JSON: ") + e.what());
  }
  try {
    if (!rec.is_object()) throw fail("record is not a JSON object");
    std::string id = rec.at("id").get<std::string>();
    std::vector<Turn> context;
    if (rec.contains("context")) {
      for (const auto& t : rec.at("context")) {
        Turn turn;
        const std::string speaker = t.at("speaker").get<std::string>();
        if (speaker == "user") {
          turn.speaker = Speaker::user;
        } else if (speaker == "agent") {
          turn.speaker = Speaker::agent;
        } else {
          throw fail("unknown speaker '" + speaker + "'");
        }
        turn.text = t.at("text").get<std::string>();
        context.push_back(std::move(turn));
      }
    }
    std::string utterance = rec.at("utterance").get<std::string>();
    const auto& out = rec.at("output");
    const std::string out_kind = out.at("kind").get<std::string>();
    Output output;
    if (out_kind == "intent") {
      output = Output::intent(out.at("label").get<std::string>());
    } else if (out_kind == "program") {
      output = Output::program(out.at("lisp").get<std::string>());
    } else {
      throw fail("unknown output kind '" + out_kind + "'");
    }
    if (output.kind != kind) {
      throw fail("output kind '" + out_kind + "' does not match task kind '" +
                 std::string(to_string(kind)) + "'");
    }
    if (output.symbols.empty()) throw fail("program has no symbols");
    Tokens tokens = build_example_tokens(context, utterance);
    Example ex{std::move(id), std::move(context), std::move(utterance), std::move(output),
               std::move(tokens)};
    return ex;
  } catch (const ParseError& e) {
    if (e.position() == line_no) throw;
    throw fail(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("schema error: ") + e.what());
  } catch (const Error& e) {
    throw fail(e.what());
  }
}

}  // namespace

Corpus parse_corpus(std::string_view jsonl, TaskKind kind) {
  std::vector<Example> examples;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string line(jsonl.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Example ex = parse_record(line, line_no, kind);
    auto [it, inserted] = seen.emplace(ex.id, line_no);
    if (!inserted) {
      throw ParseError("line " + std::to_string(line_no) + ": duplicate id '" + ex.id +
                           "' (first seen on line " + std::to_string(it->second) + ")",
                       line_no);
    }
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw ParseError("corpus is empty", 0);
  return Corpus(std::move(examples), kind);
}

Corpus load_corpus(const std::filesystem::path& path, TaskKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), kind);
}

std::string serialize_example(const Example& ex) {
  ojson rec;
  rec["id"] = ex.id;
  ojson context = ojson::array();
  for (const Turn& t : ex.context) {
    ojson turn;
    turn["speaker"] = t.speaker == Speaker::user ? "user" : "agent";
    turn["text"] = t.text;
    context.push_back(std::move(turn));
  }
  rec["context"] = std::move(context);
  rec["utterance"] = ex.utterance;
  ojson out;
  if (ex.output.kind == TaskKind::single_label) {
    out["kind"] = "intent";
    out["label"] = ex.output.label;
  } else {
    out["kind"] = "program";
    out["lisp"] = ex.output.lisp;
  }
  rec["output"] = std::move(out);
  return rec.dump();
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const Example& ex : corpus.examples()) {
    out += serialize_example(ex);
    out += '\n';
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file '" + path.string() + "'");
  out << serialize_corpus(corpus);
}

}  // namespace isl
