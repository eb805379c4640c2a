#pragma once

#include <stdexcept>
#include <string>

namespace ccgen {

/// Broad failure class. Maps one-to-one onto CLI exit codes.
enum class ErrorKind { config, data, runtime };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string field = {})
        : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Dotted path of the offending config field or record, if known.
    const std::string& field() const noexcept { return field_; }

private:
    ErrorKind kind_;
    std::string field_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& message, std::string field = {})
        : Error(ErrorKind::config, message, std::move(field)) {}
};

struct DataError : Error {
    explicit DataError(const std::string& message, std::string field = {})
        : Error(ErrorKind::data, message, std::move(field)) {}
};

struct RuntimeError : Error {
    explicit RuntimeError(const std::string& message, std::string field = {})
        : Error(ErrorKind::runtime, message, std::move(field)) {}
};

inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::runtime: return 4;
    }
    return 4;
}

inline const char* kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::data: return "data";
        case ErrorKind::runtime: return "runtime";
    }
    return "runtime";
}

}  // namespace ccgen
