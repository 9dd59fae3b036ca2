#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace isl {

using Tokens = std::vector<std::string>;

/// Inserted between dialogue turns. Contains '<' so the tokenizer can never
/// emit it from raw text.
inline constexpr std::string_view kSeparatorToken = "<sep>";

enum class TaskKind { single_label, symbol_set };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

enum class Speaker { user, agent };

struct Turn {
  Speaker speaker = Speaker::user;
  std::string text;

  bool operator==(const Turn&) const = default;
};

/// Gold output: an intent label, or a Lisp program reduced to its symbol set.
struct Output {
  TaskKind kind = TaskKind::single_label;
  std::string label;                 // single_label only
  std::string lisp;                  // symbol_set only, kept verbatim
  std::vector<std::string> symbols;  // sorted, unique; {label} for intents

  static Output intent(std::string label);
  static Output program(std::string lisp);

  bool contains(std::string_view symbol) const;
  bool operator==(const Output&) const = default;
};

struct Example {
  std::string id;
  std::vector<Turn> context;
  std::string utterance;
  Output output;
  Tokens tokens;  // model input, see build_example_tokens()

  bool operator==(const Example&) const = default;
};

/// Lowercases and splits on whitespace; every ASCII punctuation character is
/// its own token. Bytes >= 0x80 are treated as word characters.
Tokens tokenize(std::string_view text);

/// Concatenates the previous user turn, the agent turn and the current
/// utterance with separator tokens. Absent or empty turns are dropped.
Tokens build_context_input(const std::optional<std::string>& prev_user,
                           const std::optional<std::string>& agent,
                           std::string_view current);

/// Uses the last user turn and the last agent turn of the context.
Tokens build_example_tokens(const std::vector<Turn>& context, std::string_view utterance);

/// All identifier heads of the Lisp expression. String and number literals,
/// and the heads of `#(...)` literal and `^(...)` type wrappers, are skipped.
/// Throws ParseError carrying the byte offset on unbalanced input.
std::vector<std::string> extract_symbols(std::string_view lisp);

Example make_example(std::string id, std::vector<Turn> context, std::string utterance,
                     Output output);

class Corpus {
 public:
  Corpus() = default;
  /// Validates id uniqueness, token non-emptiness and output kinds.
  Corpus(std::vector<Example> examples, TaskKind kind);

  const std::vector<Example>& examples() const noexcept { return examples_; }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  std::size_t size() const noexcept { return examples_.size(); }
  TaskKind task_kind() const noexcept { return kind_; }

  /// Symbol -> number of examples whose output contains it.
  const std::map<std::string, std::size_t>& symbol_inventory() const noexcept {
    return inventory_;
  }

  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;

  /// FNV-1a over the canonical serialization.
  std::uint64_t digest() const;

  bool operator==(const Corpus& other) const {
    return kind_ == other.kind_ && examples_ == other.examples_;
  }

 private:
  std::vector<Example> examples_;
  TaskKind kind_ = TaskKind::single_label;
  std::map<std::string, std::size_t> inventory_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

Corpus load_corpus(const std::filesystem::path& path, TaskKind kind);
Corpus parse_corpus(std::string_view jsonl, TaskKind kind);

/// One JSON object per line, keys in schema order, LF endings.
std::string serialize_corpus(const Corpus& corpus);
std::string serialize_example(const Example& example);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

bool contains_any(const Tokens& tokens, const std::vector<std::string>& triggers);

}  // namespace isl
