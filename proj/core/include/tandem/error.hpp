#pragma once

#include <stdexcept>
#include <string>

namespace tandem {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model gateway.
class NetworkError : public Error { using Error::Error; };
class ProtocolError : public Error { using Error::Error; };
class MockMiss : public Error { using Error::Error; };

/// Invalid run configuration or missing endpoint/exemplar setup.
class ConfigError : public Error { using Error::Error; };
/// Malformed input file content (names file and line where known).
class DataError : public Error { using Error::Error; };
/// A caller violated an operation's documented precondition.
class PreconditionError : public Error { using Error::Error; };

// Trace schema.
class SchemaError : public Error { using Error::Error; };
class ActionSequenceError : public SchemaError { using SchemaError::SchemaError; };
class EmptyFieldError : public SchemaError { using SchemaError::SchemaError; };

// Model-output parsing (raised after the retry budget is spent).
class StepParseError : public Error { using Error::Error; };
class VerdictParseError : public Error { using Error::Error; };
class ScoreParseError : public Error { using Error::Error; };

// Numeric domain errors.
class RangeError : public Error { using Error::Error; };
class InvalidInterval : public Error { using Error::Error; };
class LengthMismatch : public Error { using Error::Error; };
class NotAPermutation : public Error { using Error::Error; };
class GroupTooSmall : public Error { using Error::Error; };
class ShapeMismatch : public Error { using Error::Error; };

// Curation.
class NoSurvivor : public Error { using Error::Error; };
class KMismatch : public Error { using Error::Error; };

}  // namespace tandem
