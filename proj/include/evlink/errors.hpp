#pragma once

#include <stdexcept>
#include <string>

namespace evlink {

// Base of everything the library throws. The CLI maps ValidationError and
// its subclasses to exit code 1 and every other Error to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data that does not satisfy a documented contract.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed file. `what()` carries the line and field context.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class MissingEmbeddingError : public ValidationError {
 public:
  explicit MissingEmbeddingError(const std::string& mention_id)
      : ValidationError("missing embedding for mention '" + mention_id + "'"),
        mention_id_(mention_id) {}
  const std::string& mention_id() const { return mention_id_; }

 private:
  std::string mention_id_;
};

// Cosine similarity of a zero vector.
class UndefinedSimilarityError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace evlink
