#ifndef ECODQN_ERROR_HPP
#define ECODQN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ecodqn {

/// Broad failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    Config = 2,
    Data = 3,
    Numeric = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string &what) : Error(ErrorKind::Config, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string &what) : Error(ErrorKind::Data, what) {}
};

/// Raised by the GSet parser; carries the 1-based line number of the offending line.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string &what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string &what) : Error(ErrorKind::Numeric, what) {}
};

} // namespace ecodqn

#endif // ECODQN_ERROR_HPP
