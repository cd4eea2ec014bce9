#pragma once

#include <stdexcept>
#include <string>

namespace blunt {

enum class Err {
  TapeExhausted,
  TapeMismatch,
  BudgetExceeded,
  PolicyIllegalDirective,
  UnknownMethod,
  NotDeliverable,
  NonPositiveK,
  DomainError,
  UnboundedRandomness,
  MalformedHistory,
  TreeTooLarge,
  NotComplete,
  WrongConfiguration,
  ParseError,
  Internal,
};

inline const char* err_name(Err e) {
  switch (e) {
    case Err::TapeExhausted: return "TapeExhausted";
    case Err::TapeMismatch: return "TapeMismatch";
    case Err::BudgetExceeded: return "BudgetExceeded";
    case Err::PolicyIllegalDirective: return "PolicyIllegalDirective";
    case Err::UnknownMethod: return "UnknownMethod";
    case Err::NotDeliverable: return "NotDeliverable";
    case Err::NonPositiveK: return "NonPositiveK";
    case Err::DomainError: return "DomainError";
    case Err::UnboundedRandomness: return "UnboundedRandomness";
    case Err::MalformedHistory: return "MalformedHistory";
    case Err::TreeTooLarge: return "TreeTooLarge";
    case Err::NotComplete: return "NotComplete";
    case Err::WrongConfiguration: return "WrongConfiguration";
    case Err::ParseError: return "ParseError";
    case Err::Internal: return "Internal";
  }
  return "?";
}

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

}  // namespace blunt
