#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace effcap {

// Base of everything the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: a config or scenario field violates its contract.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Iterative solver hit its cap without meeting tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what + " (last residual " + format(residual) + ")"), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    static std::string format(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return buf;
    }

    double residual_;
};

// A transform was evaluated outside its region of convergence, or overflowed.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// The model has no admissible solution (no sign change, failed monotonicity
// or concavity guard, empty region).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

inline void require(bool ok, const char* field, const std::string& what) {
    if (!ok) throw ValidationError(field, what);
}

}  // namespace effcap
