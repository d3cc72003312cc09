#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ttc {

// Base of every error raised by the library. `field` names the offending
// schema field, tensor or argument when there is one.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, std::string field, const std::string& message);

  const std::string& kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string kind_;
  std::string field_;
};

#define TTC_DECLARE_ERROR(Name, Base)                                   \
  class Name : public Base {                                            \
   public:                                                              \
    Name(std::string field, const std::string& message)                 \
        : Base(#Name, std::move(field), message) {}                     \
                                                                        \
   protected:                                                           \
    Name(std::string kind, std::string field, const std::string& message) \
        : Base(std::move(kind), std::move(field), message) {}           \
  }

TTC_DECLARE_ERROR(SchemaError, Error);
TTC_DECLARE_ERROR(InvariantError, Error);
// Execution-constraint violations (LUT or accumulator bitwidth limits).
TTC_DECLARE_ERROR(ConstraintError, InvariantError);
TTC_DECLARE_ERROR(ShapeError, Error);
TTC_DECLARE_ERROR(DegenerateError, Error);
TTC_DECLARE_ERROR(ConstraintViolation, Error);
TTC_DECLARE_ERROR(ParseError, Error);
TTC_DECLARE_ERROR(FrameError, Error);
TTC_DECLARE_ERROR(TransportError, Error);
TTC_DECLARE_ERROR(UnknownModel, Error);

#undef TTC_DECLARE_ERROR

}  // namespace ttc
