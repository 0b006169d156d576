#pragma once

#include <stdexcept>
#include <string>

namespace rguide {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Vector/operator dimension disagreement.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Non-finite input, degenerate direction, unbounded quantity, or a
/// violated numerical identity.
class NumericError : public Error {
public:
  using Error::Error;
};

/// Invalid argument outside numerics: unknown label, time outside the
/// horizon, bad parameter value.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Configuration file / CLI validation failure.
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace rguide
