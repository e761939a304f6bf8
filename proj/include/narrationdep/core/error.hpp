#pragma once

#include <stdexcept>
#include <string>

namespace narrationdep {

// Every failure raised by the library derives from Error; kind() is the
// machine-readable category the CLI maps onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define NARRATIONDEP_DEFINE_ERROR(Name, tag)                                \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what) : Error(tag, what) {}           \
  };

NARRATIONDEP_DEFINE_ERROR(DimensionError, "dimension")
NARRATIONDEP_DEFINE_ERROR(EmptySupportError, "empty_support")
NARRATIONDEP_DEFINE_ERROR(ConfigError, "config")
NARRATIONDEP_DEFINE_ERROR(NumericalError, "numerical")
NARRATIONDEP_DEFINE_ERROR(ParseError, "parse")
NARRATIONDEP_DEFINE_ERROR(SchemaError, "schema")
NARRATIONDEP_DEFINE_ERROR(InputError, "input")
NARRATIONDEP_DEFINE_ERROR(ConsistencyError, "consistency")
NARRATIONDEP_DEFINE_ERROR(PreconditionError, "precondition")
NARRATIONDEP_DEFINE_ERROR(IoError, "io")

#undef NARRATIONDEP_DEFINE_ERROR

}  // namespace narrationdep
