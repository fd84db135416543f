#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace matvqa {

/// Machine-readable error categories shared by the library, the CLI and the
/// review service wire format.
enum class ErrorCode {
    precondition,
    usage,
    network,
    parse,
    import,
    not_found,
    config,
    replay_miss,
    checksum,
    extraction,
    feasibility,
    construction,
    malformed_rewrite,
    missing_figure,
    conflict,
    forbidden,
    validation,
    report,
};

inline std::string_view to_string(ErrorCode code) {
    switch(code) {
        case ErrorCode::precondition: return "precondition";
        case ErrorCode::usage: return "usage";
        case ErrorCode::network: return "network";
        case ErrorCode::parse: return "parse";
        case ErrorCode::import: return "import";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::config: return "config";
        case ErrorCode::replay_miss: return "replay_miss";
        case ErrorCode::checksum: return "checksum";
        case ErrorCode::extraction: return "extraction";
        case ErrorCode::feasibility: return "feasibility";
        case ErrorCode::construction: return "construction";
        case ErrorCode::malformed_rewrite: return "malformed_rewrite";
        case ErrorCode::missing_figure: return "missing_figure";
        case ErrorCode::conflict: return "conflict";
        case ErrorCode::forbidden: return "forbidden";
        case ErrorCode::validation: return "validation";
        case ErrorCode::report: return "report";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(message), m_code(code) {}

    ErrorCode code() const noexcept { return m_code; }

private:
    ErrorCode m_code;
};

/// Transient failure (network, rate limit, 5xx). Carries how many attempts
/// were made before giving up.
class RetryableError : public Error {
public:
    RetryableError(const std::string &message, std::size_t attempts = 1)
        : Error(ErrorCode::network, message), m_attempts(attempts) {}

    std::size_t attempts() const noexcept { return m_attempts; }

private:
    std::size_t m_attempts;
};

/// Parse failure with an optional 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string &message, std::size_t line = 0)
        : Error(ErrorCode::parse, line ? message + " (line " + std::to_string(line) + ")" : message),
          m_line(line) {}

    std::size_t line() const noexcept { return m_line; }

private:
    std::size_t m_line;
};

inline void require(bool condition, const std::string &message) {
    if(!condition) throw Error(ErrorCode::precondition, message);
}

} // namespace matvqa
