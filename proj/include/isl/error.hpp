#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input at a known location (JSONL line number or Lisp offset).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// A ratio statistic whose denominator is empty. Distinct from a value of 0.
class UndefinedStatistic : public Error {
 public:
  using Error::Error;
};

}  // namespace isl
