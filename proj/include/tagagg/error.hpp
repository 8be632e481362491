#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tagagg {

// Base for all data-level failures raised by the library. The CLI maps
// NumericalError to exit code 3 and every other Error to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(std::size_t sentence, std::size_t token, const std::string& what)
      : Error("sentence " + std::to_string(sentence) + ", token " + std::to_string(token) +
              ": " + what),
        sentence_(sentence),
        token_(token) {}
  explicit ValidationError(const std::string& what) : Error(what) {}

  std::size_t sentence() const noexcept { return sentence_; }
  std::size_t token() const noexcept { return token_; }

 private:
  std::size_t sentence_ = 0;
  std::size_t token_ = 0;
};

// Contract violations on otherwise well-formed data (missing gold layer,
// k larger than the number of sources, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  NumericalError(int iteration, const std::string& what)
      : Error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace tagagg
