#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace zslb {

enum class ErrorCode {
  kInvalidArgument = 1,
  kDimensionMismatch,
  kMalformedBundle,
  kCorruptPayload,
  kInvalidDataset,
  kIo,
  kDiverged,
  kSingularSystem,
  kSpectralConflict,
  kDegenerateMetaSplit,
  kNoConsensus,
  kIncompleteTable,
};

const char* error_code_name(ErrorCode code);

// Every failure raised by the core carries one of the codes above; the C API
// maps them one-to-one onto zslb_status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidDatasetError : public Error {
 public:
  explicit InvalidDatasetError(std::vector<std::string> violations);

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

}  // namespace zslb
