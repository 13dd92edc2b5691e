#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sbmlab {

/// Base of every error raised by the library.
///
/// `numerical()` separates failures of the mathematics (bisection could not
/// bracket, a cross-check disagreed, a simulation blew up) from failures of
/// the environment or input (I/O, corrupt files, bad arguments). The CLI maps
/// the former to exit code 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual bool numerical() const { return true; }
};

class BracketFailure : public Error { using Error::Error; };
class StiffnessFailure : public Error { using Error::Error; };
class StabilityViolation : public Error { using Error::Error; };
class CrossCheckMismatch : public Error { using Error::Error; };
class QuadratureUnderflow : public Error { using Error::Error; };
class OutOfRange : public Error { using Error::Error; };
class MassExplosion : public Error { using Error::Error; };
class RejectionBudgetExceeded : public Error { using Error::Error; };
class InsufficientSurvivors : public Error { using Error::Error; };
class DegenerateFit : public Error { using Error::Error; };

/// Violated precondition on a caller-supplied argument.
class InvalidArgument : public Error {
public:
    using Error::Error;
    bool numerical() const override { return false; }
};

class IoError : public Error {
public:
    using Error::Error;
    bool numerical() const override { return false; }
};

class CollisionError : public Error {
public:
    using Error::Error;
    bool numerical() const override { return false; }
};

class CorruptManifest : public Error {
public:
    CorruptManifest(const std::string& what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    bool numerical() const override { return false; }
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace sbmlab
