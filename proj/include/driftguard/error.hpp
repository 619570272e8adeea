// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace driftguard {

/// Base of every error thrown by the library. The CLI maps subclasses to
/// exit codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by a caller-supplied value.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Unknown task id, head or split.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// Duplicate registration.
class Conflict : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong object state (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible checkpoint / result file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint written by a different format version.
class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Malformed dataset row. Message carries the file and line.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration cannot be resolved.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace driftguard
