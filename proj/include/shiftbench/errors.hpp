#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace shiftbench {

// Base of all library errors. `code()` is the stable machine-readable name
// surfaced by the CLI error records.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define SHIFTBENCH_ERROR(Name)                                       \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

SHIFTBENCH_ERROR(ParseError);
SHIFTBENCH_ERROR(SchemaError);
SHIFTBENCH_ERROR(RangeError);
SHIFTBENCH_ERROR(DuplicateIdError);
SHIFTBENCH_ERROR(UnknownIdError);
SHIFTBENCH_ERROR(AxisError);
SHIFTBENCH_ERROR(IoError);
SHIFTBENCH_ERROR(FormatError);
SHIFTBENCH_ERROR(InsufficientDataError);
SHIFTBENCH_ERROR(MappingError);
SHIFTBENCH_ERROR(ConstraintError);
SHIFTBENCH_ERROR(DegenerateError);
SHIFTBENCH_ERROR(NegativeWeightError);
SHIFTBENCH_ERROR(AugSourceError);
SHIFTBENCH_ERROR(DimensionError);
SHIFTBENCH_ERROR(NonFiniteLossError);
SHIFTBENCH_ERROR(UnknownTransformError);
SHIFTBENCH_ERROR(MissingCellError);
SHIFTBENCH_ERROR(DivisionByZeroError);

#undef SHIFTBENCH_ERROR

// Config validation failure with a JSON-pointer path to the offending value.
class ValidationError : public Error {
 public:
  ValidationError(std::string path, std::string reason)
      : Error("ValidationError", path + ": " + reason),
        path_(std::move(path)),
        reason_(std::move(reason)) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

}  // namespace shiftbench
