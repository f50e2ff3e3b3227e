#pragma once

#include <stdexcept>
#include <string>

namespace dagprobe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A graph, record or store violates one of its structural invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed bytes or JSON: bad magic, truncated payload, missing keys.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A file was written by an incompatible format version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A required input file does not exist or cannot be opened.
class FileError : public Error {
 public:
  using Error::Error;
};

/// Probe training could not proceed (no data, non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace dagprobe
