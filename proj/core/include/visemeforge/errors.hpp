#pragma once

#include <stdexcept>
#include <string>

namespace vf {

// Base class for all domain errors raised by the library. The CLI maps any
// vf::Error to exit code 1; usage problems are handled separately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Tensor/temporal geometry mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Numeric input outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UnknownWordError : public Error {
 public:
  explicit UnknownWordError(const std::string& word)
      : Error("no pronunciation for word: " + word), word_(word) {}
  const std::string& word() const { return word_; }

 private:
  std::string word_;
};

class UnmappedPhonemeError : public Error {
 public:
  explicit UnmappedPhonemeError(const std::string& phoneme)
      : Error("phoneme not covered by viseme map: " + phoneme) {}
};

class MissingVisemeError : public Error {
 public:
  using Error::Error;
};

class InvalidAnnotationError : public Error {
 public:
  using Error::Error;
};

class MissingAudioError : public Error {
 public:
  using Error::Error;
};

class EmptyUtteranceError : public Error {
 public:
  using Error::Error;
};

class TooShortError : public Error {
 public:
  using Error::Error;
};

class MissingModelError : public Error {
 public:
  using Error::Error;
};

// Raised when a training step produces a non-finite loss; carries the
// offending step metrics in the message.
class TrainingDivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace vf
