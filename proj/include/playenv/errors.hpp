#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace playenv {

/// Precondition or argument violation on an otherwise well-formed call.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A ray that never meets the ground plane in front of the camera.
class NoIntersectionError : public DomainError {
public:
  using DomainError::DomainError;
};

/// Scene or script content that fails validation. Carries every violation found.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(std::vector<std::string> violations);

  const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
  std::vector<std::string> violations_;
};

/// Malformed input file; `line` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line);

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

}  // namespace playenv
