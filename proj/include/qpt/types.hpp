#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qpt {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

/// Rejected input: precondition or invariant violation.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public InvalidArgument {
public:
    DimensionMismatch(std::size_t expected, std::size_t got)
        : InvalidArgument("dimension mismatch: expected " + std::to_string(expected) +
                          ", got " + std::to_string(got)) {}
};

/// Raised by numerical routines that fail to meet their accuracy contract.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Norm drift at the end of a time evolution exceeded the allowed tolerance.
class IntegrationFailure : public NumericalFailure {
public:
    IntegrationFailure(double drift, double tolerance)
        : NumericalFailure("norm drift " + std::to_string(drift) + " exceeds tolerance " +
                           std::to_string(tolerance) + "; reduce dt"),
          drift_(drift) {}
    double drift() const noexcept { return drift_; }

private:
    double drift_;
};

class ConvergenceFailure : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

enum class Axis { x, y, z };

inline const char* to_string(Axis a) {
    switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
    }
    return "?";
}

inline Axis parse_axis(const std::string& s) {
    if (s == "x") return Axis::x;
    if (s == "y") return Axis::y;
    if (s == "z") return Axis::z;
    throw InvalidArgument("unknown axis '" + s + "' (expected x, y or z)");
}

/// |<a|b>|^2, insensitive to global phase.
inline double fidelity(const CVector& a, const CVector& b) {
    if (a.size() != b.size())
        throw DimensionMismatch(static_cast<std::size_t>(a.size()), static_cast<std::size_t>(b.size()));
    return std::norm(a.dot(b));
}

} // namespace qpt
