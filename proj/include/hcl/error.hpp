#pragma once

#include <stdexcept>
#include <string>

namespace hcl {

/// Failure categories. The CLI maps these onto exit statuses.
enum class ErrorKind {
  domain,          // argument outside the mathematical domain of an operation
  admissibility,   // eigenvalue tuple outside the cone
  numeric,         // iteration failed to converge
  hypothesis,      // a sampled hypothesis of a lemma does not hold
  range,           // requested level not attained
  precondition,    // caller violated a stated precondition
  stencil,         // finite-difference stencil left the resolvable domain
  construction,    // sub/supersolution construction failed
  stall,           // damped Newton step underflow
  cone_exit,       // Newton could not stay admissible
  gauge,           // closed-mode bordered system singular
  resolution,      // sub-domain too thin to discretise
  lemma_violation, // a proven inequality failed beyond tolerance
  config,          // malformed configuration or missing input file
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::admissibility: return "admissibility";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::hypothesis: return "hypothesis";
    case ErrorKind::range: return "range";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::stencil: return "stencil";
    case ErrorKind::construction: return "construction";
    case ErrorKind::stall: return "stall";
    case ErrorKind::cone_exit: return "cone-exit";
    case ErrorKind::gauge: return "gauge";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::lemma_violation: return "lemma-violation";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace hcl
