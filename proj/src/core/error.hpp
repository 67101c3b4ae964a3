#ifndef SENTIFUSE_CORE_ERROR_HPP
#define SENTIFUSE_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace sentifuse {

// Error categories; the C API maps these 1:1 onto sf_status codes.
enum class ErrCode {
  Dimension,    // shape/extent mismatch
  Contract,     // precondition violated by the caller
  Parse,        // malformed file content
  Lookup,       // a referenced id/token is missing
  Config,       // invalid configuration value or combination
  Degenerate,   // degenerate numeric input (zero-norm vector)
  Io,           // file system failure
  Spec,         // inconsistent model description
  OutOfRange,   // index outside its valid range
  Internal,
};

inline const char* err_code_name(ErrCode c) {
  switch (c) {
    case ErrCode::Dimension: return "dimension";
    case ErrCode::Contract: return "contract";
    case ErrCode::Parse: return "parse";
    case ErrCode::Lookup: return "lookup";
    case ErrCode::Config: return "config";
    case ErrCode::Degenerate: return "degenerate";
    case ErrCode::Io: return "io";
    case ErrCode::Spec: return "spec";
    case ErrCode::OutOfRange: return "out_of_range";
    case ErrCode::Internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}

  ErrCode code() const { return code_; }

 private:
  ErrCode code_;
};

// nlohmann exception text starts with a bracketed tag like
// "[json.exception.out_of_range.403] "; strip it so user-facing messages
// read "key 'x' not found" instead of leaking library internals.
inline std::string strip_exception_tag(const char* what) {
  std::string s(what);
  if (!s.empty() && s.front() == '[') {
    const size_t close = s.find("] ");
    if (close != std::string::npos) s.erase(0, close + 2);
  }
  return s;
}

}  // namespace sentifuse

#endif
