#pragma once

#include <stdexcept>
#include <string>

namespace fadefree {

enum class ErrorKind {
    InvalidArgument,   // precondition violated by the caller
    NumericalFailure,  // non-stationary fit, diverging adaptation, ...
    NotFound,          // e.g. synchronization peak below the floor
    Capacity,          // state space or enumeration too large
    Config,            // malformed configuration
    Stage,             // a pipeline stage failed; message carries the stage name
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(ErrorKind::Stage, stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorKind::InvalidArgument, what);
}

} // namespace fadefree
