#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <vector>

#include "isl/corpus.hpp"
#include "isl/error.hpp"

namespace isl {

namespace {

bool is_number(std::string_view atom) {
  if (!atom.empty() && (atom.back() == 'L' || atom.back() == 'l')) atom.remove_suffix(1);
  if (!atom.empty() && atom.front() == '+') atom.remove_prefix(1);
  if (atom.empty()) return false;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(atom.data(), atom.data() + atom.size(), value);
  return ec == std::errc() && ptr == atom.data() + atom.size();
}

struct Frame {
  std::size_t open_offset;
  bool expecting_head = true;
  bool skip_head = false;     // `#(...)` literal wrapper
  bool skip_subtree = false;  // `^(...)` type annotation
};

}  // namespace

std::vector<std::string> extract_symbols(std::string_view lisp) {
  std::set<std::string> symbols;
  std::vector<Frame> stack;
  char pending_prefix = 0;

  auto on_atom = [&](std::string_view atom, bool literal) {
    if (atom == "#" || atom == "^") {
      pending_prefix = atom.front();
      return;
    }
    pending_prefix = 0;
    if (stack.empty()) return;
    Frame& top = stack.back();
    if (!top.expecting_head) return;
    top.expecting_head = false;
    if (literal || top.skip_head || top.skip_subtree || is_number(atom)) return;
    symbols.emplace(atom);
  };

  std::size_t i = 0;
  while (i < lisp.size()) {
    const char c = lisp[i];
    if (std::isspace(static_cast<unsigned char>(c)) != 0) {
      ++i;
    } else if (c == '(') {
      Frame frame{i};
      const bool inherited = !stack.empty() && stack.back().skip_subtree;
      if (!stack.empty()) stack.back().expecting_head = false;
      frame.skip_head = pending_prefix == '#';
      frame.skip_subtree = inherited || pending_prefix == '^';
      pending_prefix = 0;
      stack.push_back(frame);
      ++i;
    } else if (c == ')') {
      if (stack.empty()) throw ParseError("unbalanced ')' at offset " + std::to_string(i), i);
      stack.pop_back();
      pending_prefix = 0;
      ++i;
    } else if (c == '"') {
      const std::size_t start = i++;
      bool closed = false;
      while (i < lisp.size()) {
        if (lisp[i] == '\\') {
          i += 2;
        } else if (lisp[i] == '"') {
          ++i;
          closed = true;
          break;
        } else {
          ++i;
        }
      }
      if (!closed) {
        throw ParseError("unterminated string literal at offset " + std::to_string(start), start);
      }
      on_atom(lisp.substr(start, i - start), true);
    } else {
      const std::size_t start = i;
      // A prefix character directly before '(' is its own atom.
      if ((c == '#' || c == '^') && i + 1 < lisp.size() && lisp[i + 1] == '(') {
        on_atom(lisp.substr(i, 1), false);
        ++i;
        continue;
      }
      while (i < lisp.size()) {
        const char d = lisp[i];
        if (std::isspace(static_cast<unsigned char>(d)) != 0 || d == '(' || d == ')' || d == '"') {
          break;
        }
        ++i;
      }
      on_atom(lisp.substr(start, i - start), false);
    }
  }
  if (!stack.empty()) {
    const std::size_t at = stack.back().open_offset;
    throw ParseError("unbalanced '(' opened at offset " + std::to_string(at), at);
  }
  return {symbols.begin(), symbols.end()};
}

}  // namespace isl
