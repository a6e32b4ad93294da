#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lobsim {

enum class Errc {
  InvalidQuantity,
  DuplicateId,
  EmptyOppositeSide,
  CancelOnEmpty,
  UnknownOrder,
  EmptyBook,
  InsufficientDepth,
  InvalidParameter,
  Stalled,
  NoTransactions,
  InsufficientRows,
  WindowTooLarge,
  MissingEmpirical,
  ParseError,
  MissingInput,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidQuantity: return "InvalidQuantity";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::EmptyOppositeSide: return "EmptyOppositeSide";
    case Errc::CancelOnEmpty: return "CancelOnEmpty";
    case Errc::UnknownOrder: return "UnknownOrder";
    case Errc::EmptyBook: return "EmptyBook";
    case Errc::InsufficientDepth: return "InsufficientDepth";
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::Stalled: return "Stalled";
    case Errc::NoTransactions: return "NoTransactions";
    case Errc::InsufficientRows: return "InsufficientRows";
    case Errc::WindowTooLarge: return "WindowTooLarge";
    case Errc::MissingEmpirical: return "MissingEmpirical";
    case Errc::ParseError: return "ParseError";
    case Errc::MissingInput: return "MissingInput";
  }
  return "Unknown";
}

// Every recoverable failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  // Errors caused by bad user input, as opposed to internal inconsistencies.
  bool is_input_error() const noexcept {
    switch (code_) {
      case Errc::ParseError:
      case Errc::MissingInput:
      case Errc::MissingEmpirical:
      case Errc::InvalidParameter:
      case Errc::UnknownOrder:
      case Errc::InsufficientRows:
      case Errc::WindowTooLarge:
      case Errc::NoTransactions:
      case Errc::DuplicateId:
      case Errc::EmptyBook:
        return true;
      default:
        return false;
    }
  }

 private:
  Errc code_;
};

}  // namespace lobsim
