#pragma once

#include <stdexcept>
#include <string>

namespace lipfem {

enum class ErrorKind {
    InvalidArgument,
    OutsideDomain,
    UnsupportedDegree,
    Ellipticity,
    Solver,
    MeshTooCoarse,
    Refinement,
    GridMismatch,
    Config,
    Io,
};

/// Every failure raised by the library carries a category so the C API and the
/// CLI can map it onto stable codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace lipfem
