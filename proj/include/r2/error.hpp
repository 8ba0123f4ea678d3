#pragma once

#include <stdexcept>
#include <string>

namespace r2 {

// Precondition on a call was not met (bad orientation code, terminal state
// asked for actions, empty buffer, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// An action broke a packing rule. `constraint()` names the rule.
class ConstraintViolation : public std::runtime_error {
 public:
  ConstraintViolation(std::string constraint, const std::string& detail)
      : std::runtime_error(constraint + ": " + detail), m_constraint(std::move(constraint)) {}

  [[nodiscard]] auto constraint() const noexcept -> const std::string& { return m_constraint; }

 private:
  std::string m_constraint;
};

// Malformed instance, config or checkpoint file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during inference or training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace r2
