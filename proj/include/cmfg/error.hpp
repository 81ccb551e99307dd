#pragma once

#include <stdexcept>
#include <string>

namespace cmfg {

enum class Errc {
  QueryTooDeepInside,
  ModeDomainMismatch,
  NonpositiveDuration,
  TimeOutOfRange,
  ExitsDomain,
  PhaseOrderViolation,
  StateNotAdmissible,
  InvariantViolated,
  UnsupportedExponent,
  MaxIterationsExceeded,
  UnequalSupportSize,
  TooManyAtoms,
  EmptyTruncation,
  NotConverged,
  InvalidArgument,
  ConfigError,
};

inline const char* errc_name(Errc e) {
  switch (e) {
    case Errc::QueryTooDeepInside: return "QueryTooDeepInside";
    case Errc::ModeDomainMismatch: return "ModeDomainMismatch";
    case Errc::NonpositiveDuration: return "NonpositiveDuration";
    case Errc::TimeOutOfRange: return "TimeOutOfRange";
    case Errc::ExitsDomain: return "ExitsDomain";
    case Errc::PhaseOrderViolation: return "PhaseOrderViolation";
    case Errc::StateNotAdmissible: return "StateNotAdmissible";
    case Errc::InvariantViolated: return "InvariantViolated";
    case Errc::UnsupportedExponent: return "UnsupportedExponent";
    case Errc::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case Errc::UnequalSupportSize: return "UnequalSupportSize";
    case Errc::TooManyAtoms: return "TooManyAtoms";
    case Errc::EmptyTruncation: return "EmptyTruncation";
    case Errc::NotConverged: return "NotConverged";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace cmfg
