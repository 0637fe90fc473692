// core.hpp — Shared scalar/matrix aliases and the error hierarchy

#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pcl {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr cplx I{0.0, 1.0};
inline constexpr double pi = 3.14159265358979323846;

// Every failure raised by the library derives from pcl::error so callers can
// map categories onto exit codes without string matching.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent user input (config, shapes, preconditions).
struct config_error : error {
    using error::error;
};

// A constructed object violates a documented invariant.
struct validation_error : error {
    using error::error;
};

// Operation not defined for this kind of input (e.g. evaluating J(w) of a
// discrete mode).
struct unsupported_error : error {
    using error::error;
};

// Propagation produced non-finite values or failed to settle.
struct numerical_error : error {
    using error::error;
};

// Quadrature did not reach the requested tolerance.
struct accuracy_error : error {
    double estimate;
    double abs_error;
    accuracy_error(const std::string& what, double est, double err)
        : error(what), estimate(est), abs_error(err) {}
};

// Exponential fit could not be carried out.
struct fit_error : error {
    double residual;
    fit_error(const std::string& what, double res) : error(what), residual(res) {}
};

} // namespace pcl
