#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relaxbv {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define RELAXBV_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                       \
   public:                                                          \
    using Error::Error;                                             \
    const char* kind() const noexcept override { return #Name; }    \
  }

/// Caller violated a documented precondition.
RELAXBV_DEFINE_ERROR(PreconditionError);
/// The inner minimization of a Yosida transform runs off to -infinity.
RELAXBV_DEFINE_ERROR(UnboundedBelow);
/// sigma - ||L|| is too small to bound the search radius.
RELAXBV_DEFINE_ERROR(DegenerateMargin);
/// Boundary layer narrower than eight grid cells.
RELAXBV_DEFINE_ERROR(LayerTooThin);
/// Invalid polygon or domain description.
RELAXBV_DEFINE_ERROR(GeometryError);
/// Expression kind asked to handle vector-valued p.
RELAXBV_DEFINE_ERROR(UnsupportedArity);
/// Malformed scenario, domain or field file.
RELAXBV_DEFINE_ERROR(SchemaError);

#undef RELAXBV_DEFINE_ERROR

/// Syntax error in a density expression; carries the byte offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  const char* kind() const noexcept override { return "ParseError"; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace relaxbv
