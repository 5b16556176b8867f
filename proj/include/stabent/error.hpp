#ifndef STABENT_ERROR_HPP
#define STABENT_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stabent {

/// Position inside a model description, 1-based. Zero means "unknown".
struct SourceLocation {
  std::size_t line = 0;
  std::size_t column = 0;

  std::string str() const {
    return std::to_string(line) + ":" + std::to_string(column);
  }
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, SourceLocation where)
      : Error("parse error at " + where.str() + ": " + what), where_(where) {}

  SourceLocation where() const { return where_; }

 private:
  SourceLocation where_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, SourceLocation where)
      : Error(what + " at " + where.str()), where_(where) {}

  SourceLocation where() const { return where_; }

 private:
  SourceLocation where_;
};

/// A subset Jacobian with |det| below the singularity floor. Signals that the
/// declared determinant floor for that subset does not hold.
class SingularJacobianError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace stabent

#endif  // STABENT_ERROR_HPP
