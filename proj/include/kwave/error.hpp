#ifndef KWAVE_ERROR_HPP
#define KWAVE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kwave {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownFunctionError : public Error {
 public:
  UnknownFunctionError(const std::string& name, std::size_t offset)
      : Error("unknown function '" + name + "' at offset " + std::to_string(offset)),
        name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class UnboundVariableError : public Error {
 public:
  explicit UnboundVariableError(const std::string& name)
      : Error("unbound variable '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Non-finite arithmetic, division by zero, or a state outside the model domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class HyperbolicityError : public Error {
 public:
  using Error::Error;
};

class SingularError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// |det phi| fell below the catastrophe tolerance.
class CatastropheError : public Error {
 public:
  CatastropheError(const std::string& what, double det)
      : Error(what), det_(det) {}
  double determinant() const noexcept { return det_; }

 private:
  double det_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& pointer, const std::string& what)
      : Error(pointer + ": " + what), pointer_(pointer) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace kwave

#endif  // KWAVE_ERROR_HPP
