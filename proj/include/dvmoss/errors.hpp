#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace dvmoss {

// Bad numeric input (non-positive distance, out-of-range radius, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Degenerate geometry, e.g. a satellite coinciding with a ground user.
class InvalidGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (querying an unscheduled UE,
// augmenting a system with a duplicate member, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InfeasiblePartition : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the feasible initializer when some UE cannot be placed on any
// subcarrier of the candidate selection.
class InitializationInfeasible : public std::runtime_error {
 public:
  InitializationInfeasible(std::size_t ue, const std::string& why)
      : std::runtime_error("initialization infeasible for UE " + std::to_string(ue) + ": " + why),
        ue_(ue) {}
  std::size_t ue() const noexcept { return ue_; }

 private:
  std::size_t ue_;
};

class NoFeasibleConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scenario validation failure; key() carries the dotted key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& why)
      : std::runtime_error(key.empty() ? why : key + ": " + why), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class PairingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dvmoss
