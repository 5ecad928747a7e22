#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rydemu {

/// Base of every error raised by the emulator library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input text is not well-formed JSON.
class SyntaxError : public Error {
 public:
  using Error::Error;
};

/// A field is missing, ill-typed or unknown. `path()` is a JSON-pointer-like
/// location such as `/pulses/0/amplitude/kind`.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Semantic invariant violated (overlapping pulses, bad targets, ...).
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "validation failed";
    for (const auto& s : v) out += "; " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

class UnknownChannel : public Error {
 public:
  using Error::Error;
};

/// Two atoms share a position.
class DegenerateRegister : public Error {
 public:
  using Error::Error;
};

/// Problem exceeds the size a dense routine accepts.
class TooLarge : public Error {
 public:
  using Error::Error;
};

class NonpositiveOmega : public Error {
 public:
  using Error::Error;
};

/// Krylov exponentiation could not reach its tolerance.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

class SvdFailure : public Error {
 public:
  using Error::Error;
};

/// MPO recompression could not meet the tolerance under its bond cap.
class CompressionFailure : public Error {
 public:
  using Error::Error;
};

class InvalidLength : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class SiteOutOfRange : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace rydemu
