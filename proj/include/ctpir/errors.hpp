#pragma once

#include <stdexcept>
#include <string>

namespace ctpir {

// Every failure raised by the library derives from Error; kind() is the
// machine-readable tag the CLI reports on stderr.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define CTPIR_DEFINE_ERROR(Name, tag)                                \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(tag, what) {}     \
  };

CTPIR_DEFINE_ERROR(DimensionError, "dimension")
CTPIR_DEFINE_ERROR(DomainError, "domain")
CTPIR_DEFINE_ERROR(NumericError, "numeric")
CTPIR_DEFINE_ERROR(ContractError, "contract")
CTPIR_DEFINE_ERROR(ParseError, "parse")
CTPIR_DEFINE_ERROR(ValidationError, "validation")
CTPIR_DEFINE_ERROR(LookupError, "lookup")
CTPIR_DEFINE_ERROR(RangeError, "range")
CTPIR_DEFINE_ERROR(ConfigError, "config")

#undef CTPIR_DEFINE_ERROR

}  // namespace ctpir
