#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace paip {

// ---------------------------------------------------------------------------
// Typed errors. Every failure mode the library can signal has its own type so
// callers (and the CLI) can map them to distinct handling / exit codes.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class AbsoluteContinuityViolation : public Error {
public:
    using Error::Error;
};

class ConditioningOnNullEvent : public Error {
public:
    using Error::Error;
};

/// Raised when an exact computation would exceed a configured enumeration cap.
class ComplexityRefusal : public Error {
public:
    using Error::Error;
};

/// Iterative routine hit its iteration cap. Carries the last objective value
/// reached so the caller can decide whether the result is still usable.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double last_value)
        : Error(what), last_value(last_value) {}
    double last_value;
};

class UnsupportedView : public Error {
public:
    using Error::Error;
};

class MotivationUnsupported : public Error {
public:
    using Error::Error;
};

class HorizonTooShort : public Error {
public:
    using Error::Error;
};

class UnknownQuery : public Error {
public:
    using Error::Error;
};

class ZeroEvidence : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int column)
        : Error(what), line(line), column(column) {}
    int line;
    int column;
};

/// Configuration validation failure. Collects every violation, not just the
/// first, so a bad config can be fixed in one pass.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(join(violations)), violations(std::move(violations)) {}
    std::vector<std::string> violations;

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "config validation failed:";
        for (const auto& s : v) {
            out += "\n  - ";
            out += s;
        }
        return out;
    }
};

class OracleInfeasible : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Logging. Level comes from PAIP_LOG_LEVEL (error|warn|info|debug), default
// warn. Goes to stderr so it never pollutes machine-readable stdout.
// ---------------------------------------------------------------------------

enum class LogLevel : int { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("PAIP_LOG_LEVEL");
        if (env == nullptr) return LogLevel::kWarn;
        std::string s{env};
        if (s == "error") return LogLevel::kError;
        if (s == "warn") return LogLevel::kWarn;
        if (s == "info") return LogLevel::kInfo;
        if (s == "debug") return LogLevel::kDebug;
        return LogLevel::kWarn;
    }();
    return level;
}

inline void log_message(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[paip %s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

inline void log_warn(const std::string& msg) { log_message(LogLevel::kWarn, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::kInfo, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::kDebug, msg); }

}  // namespace paip
