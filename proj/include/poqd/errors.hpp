#pragma once

#include <stdexcept>
#include <string>

namespace poqd {

/// Base class for all poqd errors. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad command-line usage (exit code 1).
class UsageError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration file or field (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Filesystem and serialization failures (exit code 3).
class IoError : public Error {
public:
    using Error::Error;
};

/// Remote endpoint unreachable or persistently non-2xx (exit code 4).
class TransportError : public Error {
public:
    using Error::Error;
};

/// Remote endpoint replied, but the payload violates the wire protocol.
class ProtocolError : public TransportError {
public:
    using TransportError::TransportError;
};

/// Violated precondition or data invariant (exit code 5).
class InvariantError : public Error {
public:
    using Error::Error;
};

/// Unusable LLM output. Recoverable: callers fall back to degraded results.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Exit code for the CLI given a caught exception.
int exit_code_for(const std::exception& e);

} // namespace poqd
