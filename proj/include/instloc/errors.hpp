#pragma once

#include <stdexcept>
#include <string>

namespace instloc {

// Input outside an operation's domain (out-of-range pixel, zero vector,
// unknown label channel, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Geometric configuration that admits no unique answer (collinear points,
// undersized point sets).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace instloc
