#ifndef PERCEPT_ERRORS_HPP
#define PERCEPT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace percept {

/// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Mismatched tensor/vector dimensions.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// Invalid argument values (empty batch, non-positive count, bad label...).
class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

/// NaN/Inf where finite values are required, or a diverged computation.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

/// Bad run configuration (unknown key, missing checkpoint, invalid mode).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// I/O failures and unreadable data files.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

/// Malformed structured text; carries the 1-based line number when known.
class ParseError : public DataError {
public:
    ParseError(const std::string& msg, long line = -1)
        : DataError(line >= 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

}  // namespace percept

#endif
