#include "core/error.hpp"

namespace zslb {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kMalformedBundle: return "malformed bundle";
    case ErrorCode::kCorruptPayload: return "corrupt payload";
    case ErrorCode::kInvalidDataset: return "invalid dataset";
    case ErrorCode::kIo: return "I/O error";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kSingularSystem: return "singular system";
    case ErrorCode::kSpectralConflict: return "spectral conflict";
    case ErrorCode::kDegenerateMetaSplit: return "degenerate meta split";
    case ErrorCode::kNoConsensus: return "no consensus";
    case ErrorCode::kIncompleteTable: return "incomplete table";
  }
  return "unknown error";
}

namespace {
std::string join_violations(const std::vector<std::string>& v) {
  std::string out = std::to_string(v.size()) + " violation(s)";
  for (const auto& s : v) out += "; " + s;
  return out;
}
}  // namespace

InvalidDatasetError::InvalidDatasetError(std::vector<std::string> violations)
    : Error(ErrorCode::kInvalidDataset, join_violations(violations)),
      violations_(std::move(violations)) {}

}  // namespace zslb
