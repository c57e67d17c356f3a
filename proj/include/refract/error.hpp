#pragma once

// Error taxonomy shared by the whole library.
//
// Every failure is an exception carrying a coarse category; the CLI maps the
// category to its exit code (validation -> 1, numerical -> 2, threshold -> 3).

#include <stdexcept>
#include <string>

namespace refract {

enum class Errc {
    validation,   ///< model/config rejected before any numerics ran
    numerical,    ///< a solver, quadrature, or series failed to converge
    unsupported,  ///< request outside the implemented regime (e.g. kernel family)
    domain,       ///< evaluation outside a curve's or function's domain
    threshold,    ///< a diagnostic was computed but exceeds its pass threshold
};

class Error : public std::runtime_error {
public:
    Error(Errc kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Errc kind() const noexcept { return kind_; }

private:
    Errc kind_;
};

[[noreturn]] inline void raise(Errc kind, const std::string& what) { throw Error(kind, what); }

/// CLI exit-code convention for a caught Error.
inline int exit_code(Errc kind) noexcept {
    switch (kind) {
        case Errc::validation: return 1;
        case Errc::threshold: return 3;
        default: return 2;
    }
}

}  // namespace refract
