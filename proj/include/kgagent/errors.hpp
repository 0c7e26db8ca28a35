#pragma once

#include <stdexcept>
#include <string>

namespace kgagent {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (bad dimension, zero vector, empty action list...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

/// Operation is not legal in the object's current lifecycle state (e.g. updating a pruned skill).
class StateError : public Error {
public:
    using Error::Error;
};

class EmptyCandidates : public Error {
public:
    using Error::Error;
};

/// Transport-level oracle failure: timeout, refused connection, 5xx. Safe to retry.
class OracleUnavailable : public Error {
public:
    using Error::Error;
};

/// The oracle answered, but the answer breaks the wire contract. Never retried.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class VersionMismatch : public Error {
public:
    using Error::Error;
};

/// A loaded snapshot violates a store invariant. `invariant()` names which one.
class CorruptSnapshot : public Error {
public:
    CorruptSnapshot(std::string invariant, const std::string& detail)
        : Error("corrupt snapshot: " + invariant + ": " + detail), invariant_(std::move(invariant)) {}

    const std::string& invariant() const noexcept { return invariant_; }

private:
    std::string invariant_;
};

} // namespace kgagent
