#pragma once

#include <stdexcept>
#include <string>

namespace egan {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatch between operands of a tensor primitive.
struct DimensionError : Error {
  using Error::Error;
};

// A documented precondition was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Numeric domain violation (e.g. log of a nonpositive value).
struct DomainError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Malformed or wrong-version file content.
struct FormatError : Error {
  using Error::Error;
};

// Digest mismatch or truncation detected in a persisted artifact.
struct CorruptionError : Error {
  using Error::Error;
};

// A persisted artifact carries a recognized but unsupported version tag.
struct VersionError : Error {
  using Error::Error;
};

}  // namespace egan
