#include <cctype>

#include "isl/corpus.hpp"
#include "isl/error.hpp"

namespace isl {

namespace {

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      tokens.push_back(std::move(word));
      word.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c) != 0) {
      flush();
    } else if (is_word_byte(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return tokens;
}

Tokens build_context_input(const std::optional<std::string>& prev_user,
                           const std::optional<std::string>& agent,
                           std::string_view current) {
  Tokens out;
  auto append_turn = [&out](std::string_view text) {
    Tokens turn = tokenize(text);
    if (turn.empty()) return;
    out.insert(out.end(), std::make_move_iterator(turn.begin()),
               std::make_move_iterator(turn.end()));
    out.emplace_back(kSeparatorToken);
  };
  if (prev_user) append_turn(*prev_user);
  if (agent) append_turn(*agent);

  Tokens cur = tokenize(current);
  if (cur.empty()) throw Error("build_context_input: current utterance has no tokens");
  out.insert(out.end(), std::make_move_iterator(cur.begin()), std::make_move_iterator(cur.end()));
  return out;
}

Tokens build_example_tokens(const std::vector<Turn>& context, std::string_view utterance) {
  std::optional<std::string> prev_user;
  std::optional<std::string> agent;
  for (const Turn& turn : context) {
    if (turn.speaker == Speaker::user) {
      prev_user = turn.text;
    } else {
      agent = turn.text;
    }
  }
  return build_context_input(prev_user, agent, utterance);
}

bool contains_any(const Tokens& tokens, const std::vector<std::string>& triggers) {
  for (const std::string& tok : tokens) {
    for (const std::string& trig : triggers) {
      if (tok == trig) return true;
    }
  }
  return false;
}

}  // namespace isl
