#pragma once

#include <stdexcept>
#include <string>

namespace hs {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class EmptyStreamError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class OrderingError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class SpecError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Tensor or layer shapes do not chain.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public TrainingError {
 public:
  DivergenceError(const std::string& what, int epoch) : TrainingError(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class GroupingError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

/// Malformed text or binary input. `position` is a 1-based line number (or byte
/// offset for binary input) when known, 0 otherwise.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position = 0)
      : Error(position ? what + " (at " + std::to_string(position) + ")" : what),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Expected upstream artifact is absent; names the file and the producing step.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(const std::string& file, const std::string& producer)
      : Error("missing artifact '" + file + "' (produce it with `hsdep " + producer + "`)"),
        file_(file),
        producer_(producer) {}
  const std::string& file() const noexcept { return file_; }
  const std::string& producer() const noexcept { return producer_; }

 private:
  std::string file_;
  std::string producer_;
};

}  // namespace hs
