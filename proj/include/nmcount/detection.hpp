#pragma once

// Null-result detection in a Lorentzian environment of width Lambda,
// checked every tau. Everything depends on the environment only through
// the scaling variable x = Lambda * tau and the offset c = 1 - i d.

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "nmcount/linalg.hpp"

namespace nmcount {

struct DetectionParams {
    double gamma = 1.0;      ///< bare emission rate Gamma = 2 pi D0 [1/time]
    double lambda_bw = 1.0;  ///< Lorentzian bandwidth Lambda [1/time]
    double d = 0.0;          ///< detuning from the spectral centre in units of Lambda
    double tau = 0.0;        ///< detector response time [time]

    double x() const { return tau == 0.0 ? 0.0 : lambda_bw * tau; }
    Complex c() const { return {1.0, -d}; }

    void validate() const {
        std::ostringstream os;
        if (!(gamma > 0.0) || std::isnan(gamma)) {
            os << "DetectionParams: gamma must be > 0 (got " << gamma << ")";
        } else if (!(lambda_bw > 0.0) || std::isnan(lambda_bw)) {
            os << "DetectionParams: lambda_bw must be > 0 (got " << lambda_bw << ")";
        } else if (!(tau >= 0.0) || std::isnan(tau)) {
            os << "DetectionParams: tau must be >= 0 (got " << tau << ")";
        } else if (!std::isfinite(d)) {
            os << "DetectionParams: d must be finite";
        } else if (std::isnan(x())) {
            os << "DetectionParams: x = lambda_bw * tau is undefined";
        }
        if (!os.str().empty()) {
            throw std::invalid_argument(os.str());
        }
    }

    /// Parameters with tau chosen so that lambda_bw * tau == x.
    static DetectionParams from_x(double gamma, double lambda_bw, double x, double d = 0.0) {
        DetectionParams p{gamma, lambda_bw, d, x / lambda_bw};
        p.validate();
        return p;
    }
};

namespace detail {

/// exp(z) - 1 without cancellation near z = 0.
inline Complex expm1(Complex z) {
    const double a = z.real();
    const double b = z.imag();
    const double sh = std::sin(0.5 * b);
    return {std::expm1(a) * std::cos(b) - 2.0 * sh * sh, std::exp(a) * std::sin(b)};
}

/// 1 - (1 - e^{-z}) / z, analytic at z = 0.
inline Complex one_minus_relaxation(Complex z) {
    if (std::abs(z) < 1e-2) {
        // z/2 - z^2/6 + z^3/24 - z^4/120 + z^5/720
        return z * (1.0 / 2 + z * (-1.0 / 6 + z * (1.0 / 24 + z * (-1.0 / 120 + z / 720.0))));
    }
    return 1.0 + expm1(-z) / z;
}

}  // namespace detail

/// Complex decay exponent kappa(x, d) with abar(dt) = exp(-kappa Gamma dt / 2).
/// x = 0 gives 0 (frozen); x = +inf gives 1/c (wide band).
inline Complex decay_exponent(double x, double d) {
    if (!(x >= 0.0)) {
        throw std::invalid_argument("decay_exponent: x must be >= 0");
    }
    const Complex c{1.0, -d};
    if (x == 0.0) {
        return 0.0;
    }
    if (std::isinf(x)) {
        return 1.0 / c;
    }
    return detail::one_minus_relaxation(c * x) / c;
}

/// Effective decay rate at scaling variable x (x may be +inf).
inline double effective_rate(double x, double d, double gamma) {
    return decay_exponent(x, d).real() * gamma;
}

inline double effective_rate(const DetectionParams& p) {
    p.validate();
    return effective_rate(p.x(), p.d, p.gamma);
}

/// No-click survival amplitude abar(dt) of the excited level over a window dt.
inline Complex survival_amplitude(const DetectionParams& p, double dt) {
    p.validate();
    if (!(dt >= 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("survival_amplitude: dt must be finite and >= 0");
    }
    if (dt == 0.0) {
        return 1.0;
    }
    return std::exp(-decay_exponent(p.x(), p.d) * (0.5 * p.gamma * dt));
}

/// Click weight q(dt) = 1 - |abar(dt)|^2.
inline double jump_weight(const DetectionParams& p, double dt) {
    p.validate();
    if (!(dt >= 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("jump_weight: dt must be finite and >= 0");
    }
    // |abar|^2 = exp(-gamma_eff dt) exactly, so use expm1 for the complement.
    return -std::expm1(-effective_rate(p) * dt);
}

}  // namespace nmcount
