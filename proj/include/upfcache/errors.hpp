#pragma once

#include <stdexcept>
#include <string>

namespace upfcache {

/// A configuration value is invalid. field() names the offending key using
/// the config file's dotted path (e.g. "pipeline.descriptor_count").
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// An internal invariant (conservation, accounting, partition containment)
/// was broken. Always fatal.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace upfcache
