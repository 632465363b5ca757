#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace branchlab {

// Bad construction parameters (offspring law, driver, grid, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Argument outside an operation's domain (v > 1 for psi, etc).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class ExplosionError : public std::runtime_error {
public:
    ExplosionError(std::uint64_t events, std::uint64_t cap)
        : std::runtime_error("event cap exceeded: " + std::to_string(events) +
                             " events consumed (cap " + std::to_string(cap) + ")"),
          events_(events) {}

    std::uint64_t events() const noexcept { return events_; }

private:
    std::uint64_t events_;
};

// Grid too small for the requested operation (padding or aliasing).
class GridError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Deterministic solver failed its own consistency checks.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Monte Carlo layer could not produce an estimate.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace branchlab
