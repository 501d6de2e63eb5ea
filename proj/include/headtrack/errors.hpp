#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace headtrack {

/// Precondition violated by the caller (bad dimensions, out-of-range index).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A descriptor kind was requested that the feature volume does not carry.
class DescriptorUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A descriptor became the zero vector where a unit vector is required.
class DegenerateDescriptor : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optional diagnostics (attention maps) were not recorded.
class Unavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ParseErrorKind {
  bad_magic,
  bad_version,
  truncated_payload,
  trailing_bytes,
  bad_dimensions,
  non_finite,
  schema,
  io,
};

const char* to_string(ParseErrorKind kind);

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

}  // namespace headtrack
