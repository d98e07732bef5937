#pragma once

#include <stdexcept>
#include <string>

namespace srca {

/// Base for every error the engine raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument to a pure operation (empty score sequence, index out of range, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates its contract. `field` is the dotted key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed input file (world, dataset, stored result).
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Backend could not be reached after all retries.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

/// Backend answered, but the answer does not fit the protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace srca
