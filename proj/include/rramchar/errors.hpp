#pragma once

#include <stdexcept>
#include <string>

namespace rramchar {

// Error categories. Values 1..4 double as CLI exit codes; busy/parse are
// folded onto range/usage at the CLI boundary.
enum class ErrorCode : int {
    ok        = 0,
    usage     = 1,
    range     = 2,
    io        = 3,
    integrity = 4,
    busy      = 5,
    parse     = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const { return code_; }

    // Exit code as documented for the CLI (0 success, 1 usage, 2
    // range/selection, 3 I/O, 4 integrity).
    int exit_code() const {
        switch (code_) {
            case ErrorCode::busy: return 2;
            case ErrorCode::parse: return 1;
            default: return static_cast<int>(code_);
        }
    }

private:
    ErrorCode code_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& w) : Error(ErrorCode::usage, w) {}
};
struct RangeError : Error {
    explicit RangeError(const std::string& w) : Error(ErrorCode::range, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorCode::io, w) {}
};
struct IntegrityError : Error {
    explicit IntegrityError(const std::string& w) : Error(ErrorCode::integrity, w) {}
};
struct BusyError : Error {
    explicit BusyError(const std::string& w) : Error(ErrorCode::busy, w) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& w) : Error(ErrorCode::parse, w) {}
};

}  // namespace rramchar
