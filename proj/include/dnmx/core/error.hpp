#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dnmx {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown market, unknown key, out-of-range setting.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent data: validation failures, alignment errors,
/// import errors, missing upstream artifacts.
class DataError : public Error {
public:
    using Error::Error;
};

/// Model input that violates an operation's contract (missing [SEP],
/// index out of range, all-pad sequence).
class InputError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    ShapeError(const std::string& op, const std::string& detail)
        : Error("shape mismatch in " + op + ": " + detail), op_(op) {}
    const std::string& op() const noexcept { return op_; }

private:
    std::string op_;
};

class CrawlError : public Error {
public:
    using Error::Error;
};

class ServiceError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss during training. `at` is the step or epoch index.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t at) : Error(what), at_(at) {}
    std::size_t at() const noexcept { return at_; }

private:
    std::size_t at_;
};

} // namespace dnmx
