// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <stdexcept>
#include <string>

namespace dapnet {

// Root of every error thrown by the library. The CLI maps the three
// families below onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or unknown configuration keys/values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed files: archives, CSV inputs, manifests, checkpoints.
class FormatError : public Error {
 public:
  enum class Kind {
    kBadContainer,
    kMissingEntry,
    kShapeMismatch,
    kTruncated,
    kBadMetadata,
    kLabelRange,
    kVersionMismatch,
    kChecksum,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// CSV parse failure with the 1-based line number that triggered it.
class ParseError : public FormatError {
 public:
  enum class Reason { kEmpty, kMissingColumn, kNonNumeric, kFrameOrder, kRowWidth };

  ParseError(Reason reason, std::size_t line, const std::string& what)
      : FormatError(Kind::kBadMetadata, what), reason_(reason), line_(line) {}
  Reason reason() const noexcept { return reason_; }
  std::size_t line() const noexcept { return line_; }

 private:
  Reason reason_;
  std::size_t line_;
};

// Precondition violations on arguments (bad shapes, overlapping segments, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dapnet
