#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vpiseg {

enum class ErrorKind {
    invalid_argument,
    shape,
    io,
    format,
    divergence,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::shape: return "shape";
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::divergence: return "divergence";
    }
    return "unknown";
}

/// Library-wide exception. `kind()` feeds the CLI's machine-readable error prefix.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool cond, ErrorKind kind, const std::string& message) {
    if (!cond) throw Error(kind, message);
}

} // namespace vpiseg
