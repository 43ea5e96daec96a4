#pragma once

#include <stdexcept>
#include <string>

namespace qfb {

/// Raised when a physical configuration sits on a singularity of the
/// closed-form solutions (as opposed to malformed input, which raises
/// std::invalid_argument).
class DomainError : public std::domain_error {
 public:
  enum class Kind {
    degenerate_denominator,  // stationary-state denominator vanishes
    singular_direction,      // tan(theta) diverges on the equator
    singular_denominator,    // lambda = -sqrt(gamma)/2, steady state is the origin
    unreachable_direction,   // no admissible (lambda, alpha) points along theta
  };

  DomainError(Kind kind, const std::string& what) : std::domain_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace qfb
