#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bpr {

// Base class for everything the library throws on purpose.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (bad dimensions, bad ranges, ...).
class ConfigError : public Error {
public:
  using Error::Error;
};

// Problems with input data files or their content.
class DataError : public Error {
public:
  using Error::Error;
};

class ParseError : public DataError {
public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class EmptyDatasetError : public DataError {
public:
  using DataError::DataError;
};

class SplitError : public DataError {
public:
  using DataError::DataError;
};

class SearchError : public Error {
public:
  using Error::Error;
};

class AlignmentError : public Error {
public:
  using Error::Error;
};

class IndexError : public Error {
public:
  using Error::Error;
};

class NoNegativeAvailableError : public Error {
public:
  using Error::Error;
};

// Non-finite value produced during optimization; carries row/step diagnostics.
class NumericsError : public Error {
public:
  using Error::Error;
};

}  // namespace bpr
