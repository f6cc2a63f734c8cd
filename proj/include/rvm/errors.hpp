#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace rvm {

/// Caller broke a documented precondition (bad index, mismatched shapes, ...).
class ContractViolation : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// An unmollified kernel was evaluated at the origin.
class SingularityError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Input outside the mathematical domain of a closed-form function (e.g. t <= 0).
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// A non-finite value appeared during time stepping.
class BlowUpError : public std::runtime_error {
  public:
    BlowUpError(const std::string& what, std::size_t step, std::size_t particle, std::size_t copy)
        : std::runtime_error(what + " (step " + std::to_string(step) + ", particle " +
                             std::to_string(particle) + ", copy " + std::to_string(copy) + ")"),
          step_(step), particle_(particle), copy_(copy) {}

    std::size_t step() const noexcept { return step_; }
    std::size_t particle() const noexcept { return particle_; }
    std::size_t copy() const noexcept { return copy_; }

  private:
    std::size_t step_;
    std::size_t particle_;
    std::size_t copy_;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration input. `key()` and `line()` locate the offending entry;
/// line is 0 when the problem is not tied to a file line.
class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string& msg, std::string key, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + key + ": " + msg
                                      : key + ": " + msg),
          key_(std::move(key)), line_(line) {}

    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

  private:
    std::string key_;
    int line_;
};

}  // namespace rvm
