#ifndef DKG_ERROR_HPP
#define DKG_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dkg {

enum class ErrorCode {
  InvalidParams,
  NoConvergence,
  FitUnstable,
  NoNegativeEigenvalue,
  DiscretizationTooCoarse,
  QuadratureError,
  ConfigurationTooClose,
  DimensionTooSmall,
  DegenerateConfiguration,
  UnknownName,
  RankDeficient,
  NotAdmissible,
  CollisionDetected,
  WindowTooShort,
  UnstableStep,
  BlowupDetected,
  NewtonDiverged,
  GuessTooFar,
  GramSingular,
  NoSignChange,
  HorizonTooShort,
  IoError,
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::FitUnstable: return "FitUnstable";
    case ErrorCode::NoNegativeEigenvalue: return "NoNegativeEigenvalue";
    case ErrorCode::DiscretizationTooCoarse: return "DiscretizationTooCoarse";
    case ErrorCode::QuadratureError: return "QuadratureError";
    case ErrorCode::ConfigurationTooClose: return "ConfigurationTooClose";
    case ErrorCode::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::UnknownName: return "UnknownName";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NotAdmissible: return "NotAdmissible";
    case ErrorCode::CollisionDetected: return "CollisionDetected";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::UnstableStep: return "UnstableStep";
    case ErrorCode::BlowupDetected: return "BlowupDetected";
    case ErrorCode::NewtonDiverged: return "NewtonDiverged";
    case ErrorCode::GuessTooFar: return "GuessTooFar";
    case ErrorCode::GramSingular: return "GramSingular";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }
  const char* name() const { return error_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode c, const std::string& what) { throw Error(c, what); }

inline void require(bool ok, ErrorCode c, const std::string& what) {
  if (!ok) fail(c, what);
}

}  // namespace dkg

#endif
