#pragma once

#include <stdexcept>
#include <string>

namespace kam {

/// Broad category of a failure, used by the CLI to pick an exit code.
enum class ErrorKind {
    InvalidArgument,
    Domain,
    NonConvergence,
    SmallDivisor,
    Structural,
    Config,
};

/// Exception type thrown by every module of the library.
class KamError : public std::runtime_error {
public:
    KamError(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Throws a KamError of the given kind when `cond` is false.
inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) throw KamError(kind, what);
}

}  // namespace kam
