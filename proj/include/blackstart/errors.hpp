#pragma once

#include <stdexcept>
#include <string>

namespace blackstart {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// -- grid file ingestion ------------------------------------------------------

class ParseError : public Error {
public:
    using Error::Error;
};

/// A required field is missing or has the wrong type. `where()` names the JSON location.
class SchemaError : public Error {
public:
    SchemaError(std::string where, const std::string& what)
        : Error(where + ": " + what), where_(std::move(where)) {}
    [[nodiscard]] const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// -- impedance matrix ---------------------------------------------------------

class ImpedanceError : public Error {
public:
    using Error::Error;
};
class NonpositiveReactance : public ImpedanceError {
public:
    using ImpedanceError::ImpedanceError;
};
class NotRestored : public ImpedanceError {
public:
    explicit NotRestored(int node) : ImpedanceError("node " + std::to_string(node) + " is not restored"), node_(node) {}
    [[nodiscard]] int node() const noexcept { return node_; }

private:
    int node_;
};
class AlreadyRestored : public ImpedanceError {
public:
    explicit AlreadyRestored(int node)
        : ImpedanceError("node " + std::to_string(node) + " is already restored"), node_(node) {}
    [[nodiscard]] int node() const noexcept { return node_; }

private:
    int node_;
};
class Ungrounded : public ImpedanceError {
public:
    Ungrounded() : ImpedanceError("impedance matrix has no ground reference") {}
};
class DegenerateLoop : public ImpedanceError {
public:
    using ImpedanceError::ImpedanceError;
};

// -- strength / converter -----------------------------------------------------

class ZeroImpedance : public Error {
public:
    ZeroImpedance() : Error("Thevenin impedance is zero") {}
};
class ZeroDcPower : public Error {
public:
    ZeroDcPower() : Error("short circuit ratio undefined for zero DC power") {}
};
class InfeasibleDispatch : public Error {
public:
    using Error::Error;
};
class NoRealRoot : public Error {
public:
    using Error::Error;
};

// -- power flow / simulation / search -----------------------------------------

class Diverged : public Error {
public:
    using Error::Error;
};
class Unreachable : public Error {
public:
    using Error::Error;
};
class NoFeasibleScheme : public Error {
public:
    NoFeasibleScheme() : Error("no chromosome simulated feasibly") {}
};

}  // namespace blackstart
