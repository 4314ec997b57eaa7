#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fmc {

/// Base class for all pipeline errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class EmptyDatasetError : public Error {
public:
  using Error::Error;
};

class TooSmallDatasetError : public Error {
public:
  using Error::Error;
};

class DegenerateColumnError : public Error {
public:
  explicit DegenerateColumnError(std::string column)
      : Error("degenerate column: " + column), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

private:
  std::string column_;
};

class MissingParamsError : public Error {
public:
  explicit MissingParamsError(const std::string& column)
      : Error("no standardizer parameters for column: " + column) {}
};

class InvalidObservationError : public Error {
public:
  using Error::Error;
};

class OutOfDomainError : public Error {
public:
  using Error::Error;
};

class SchemaError : public Error {
public:
  using Error::Error;
};

class SingularSystemError : public Error {
public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
public:
  explicit TrainingDivergedError(std::size_t epoch)
      : Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

private:
  std::size_t epoch_;
};

class InsufficientHistoryError : public Error {
public:
  using Error::Error;
};

class NoSuccessfulTrialError : public Error {
public:
  using Error::Error;
};

class AlignmentError : public Error {
public:
  using Error::Error;
};

class UndefinedR2Error : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

} // namespace fmc
