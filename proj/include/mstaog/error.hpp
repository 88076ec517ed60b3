#pragma once

#include <stdexcept>
#include <string>

namespace mstaog {

/// Base class of every exception thrown by the library. The CLI maps the
/// category onto its exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { Usage, Data, Numeric };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

/// Missing files, unreadable directories, absent attributes in the manifest.
class IngestError : public Error {
 public:
  explicit IngestError(const std::string& what) : Error(Category::Data, what) {}
};

/// Malformed record in a text file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, int line, const std::string& what)
      : Error(Category::Data, file + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::Usage, what) {}
};

/// Array or image dimensions incompatible with the requested operation.
class SizeError : public Error {
 public:
  explicit SizeError(const std::string& what) : Error(Category::Data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(Category::Numeric, what) {}
};

class DegenerateError : public NumericError {
 public:
  using NumericError::NumericError;
};

class UnderdeterminedError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace mstaog
