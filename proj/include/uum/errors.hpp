#pragma once

#include <stdexcept>
#include <string>

namespace uum {

enum class ErrorCategory {
    config,
    data,
    numeric,
};

/// Base for every error the library raises. The category decides the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(ErrorCategory::config, message) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error(ErrorCategory::data, message) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error(ErrorCategory::numeric, message) {}
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::numeric: return "numeric";
    }
    return "unknown";
}

} // namespace uum
