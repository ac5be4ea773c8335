#pragma once

#include <stdexcept>
#include <string>

namespace smoothfix {

enum class ErrorCode {
  kModelDefinition,
  kInvalidArgument,
  kAlphaNotBracketed,
  kInconclusive,
  kPopulationCap,
  kContractViolation,
  kEmptySample,
  kLatticeDiscipline,
  kConfig,
  kChecksum,
  kIo,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace smoothfix
