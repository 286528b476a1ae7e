#include "flowlab/types.hpp"

namespace flowlab {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PresetNotFound: return "preset_not_found";
    case ErrorCode::AuditUnavailable: return "audit_unavailable";
    case ErrorCode::InvalidConfig: return "invalid_config";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::SolverFailure: return "solver_failure";
    case ErrorCode::Io: return "io_error";
  }
  return "unknown";
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
    case Verdict::UnverifiedPremise: return "unverified_premise";
    case Verdict::Unresolved: return "unresolved";
  }
  return "unknown";
}

}  // namespace flowlab
