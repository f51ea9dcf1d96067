#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mckv {

// Base of every error thrown by the library. The CLI maps ConfigError and
// ParseError to exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public ConfigError {
public:
    ParseError(std::size_t position, const std::string& message)
        : ConfigError("parse error at " + std::to_string(position) + ": " + message),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// Non-finite intermediate value while evaluating an expression.
class EvalError : public Error {
public:
    EvalError(const std::string& subexpression, const std::string& message)
        : Error("evaluation error in '" + subexpression + "': " + message),
          subexpression_(subexpression) {}

    const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

// Diffusion matrix with an eigenvalue below -kPdTolerance.
class PdError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace mckv
