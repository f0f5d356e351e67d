#pragma once

// Long-time large-deviation analysis of the click record.
//
// The s-tilted generator acts as
//     L_s rho = -i[H, rho] + g (e^{-s} J rho J^+ - 1/2 {J^+ J, rho}),
// and P(s, t) = Tr e^{L_s t} rho0 ~ e^{t theta(s)} with theta the eigenvalue
// of largest real part. The characteristic function is lambda(s) = -theta(s),
// so lambda(0) = 0 and lambda'(s) = I(s) >= 0 is the s-biased click rate.

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmcount/atom_models.hpp"
#include "nmcount/detection.hpp"
#include "nmcount/linalg.hpp"
#include "nmcount/parallel.hpp"

namespace nmcount {

struct TiltedGenerator {
    double s = 0.0;
    double gamma_eff = 0.0;
    Eigen::Index dim = 0;  ///< atom dimension; matrix is dim^2 x dim^2
    CMatrix matrix;
};

/// Generator pieces that do not depend on s.
struct GeneratorParts {
    CMatrix no_jump;    ///< -i[H, .] - g/2 {J^+ J, .}
    CMatrix recycling;  ///< g J . J^+
};

inline GeneratorParts generator_parts(const AtomModel& model, double gamma_eff) {
    model.validate();
    if (!(gamma_eff >= 0.0) || !std::isfinite(gamma_eff)) {
        throw std::invalid_argument("generator: gamma_eff must be finite and >= 0");
    }
    const Eigen::Index d = model.dim;
    const CMatrix id = CMatrix::Identity(d, d);
    const CMatrix& h = model.hamiltonian;
    const CMatrix& j = model.jump_op;
    const CMatrix jdj = j.adjoint() * j;

    GeneratorParts parts;
    parts.no_jump = -kI * (vectorize_superop(h, id) - vectorize_superop(id, h)) -
                    0.5 * gamma_eff * (vectorize_superop(jdj, id) + vectorize_superop(id, jdj));
    parts.recycling = gamma_eff * vectorize_superop(j, j.adjoint());
    return parts;
}

inline TiltedGenerator build_tilted_generator(const AtomModel& model, double gamma_eff, double s) {
    if (std::isnan(s) || s == -std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("build_tilted_generator: s must be a number < +inf or +inf");
    }
    const GeneratorParts parts = generator_parts(model, gamma_eff);
    const double weight = std::isinf(s) ? 0.0 : std::exp(-s);
    if (!std::isfinite(weight)) {
        throw std::invalid_argument("build_tilted_generator: e^{-s} overflows");
    }
    return {s, gamma_eff, model.dim, parts.no_jump + weight * parts.recycling};
}

/// Unconditional (s = 0) Lindblad generator.
inline CMatrix lindblad_generator(const AtomModel& model, double gamma_eff) {
    return build_tilted_generator(model, gamma_eff, 0.0).matrix;
}

/// Trace-one stationary density matrix of the s = 0 generator.
inline CMatrix stationary_state(const AtomModel& model, double gamma_eff) {
    const CMatrix l0 = lindblad_generator(model, gamma_eff);
    const CVector v = null_vector(l0);
    CMatrix rho = unvec(v, model.dim);
    const Complex tr = rho.trace();
    if (std::abs(tr) < 1e-12) {
        throw NumericalError("stationary_state: kernel vector is traceless");
    }
    rho /= tr;
    return 0.5 * (rho + rho.adjoint());
}

struct Characteristic {
    double lambda = 0.0;   ///< -Re theta(s)
    Complex theta;         ///< dominant eigenvalue of L_s
    double gap = 0.0;      ///< Re theta_1 - Re theta_2
    bool degenerate = false;
};

inline constexpr double kDegenerateGap = 1e-10;

inline Characteristic characteristic_function(const TiltedGenerator& gen) {
    const auto pairs = eigen_spectrum(gen.matrix);
    Characteristic out;
    out.theta = pairs.front().value;
    out.lambda = -out.theta.real();
    out.gap = pairs.size() > 1 ? pairs[0].value.real() - pairs[1].value.real()
                               : std::numeric_limits<double>::infinity();
    out.degenerate = out.gap < kDegenerateGap;
    return out;
}

struct LDPoint {
    double s = 0.0;
    double lambda = 0.0;
    double flux = 0.0;              ///< I(s) = lambda'(s)
    double second_cumulant = 0.0;   ///< lambda''(s) = F_2 / t
    double shot_noise = 0.0;        ///< 2 |lambda''(s)|
    std::optional<double> fano;     ///< variance / mean = -lambda''/lambda'
    std::optional<double> mandel_q; ///< fano - 1
    double gap = 0.0;
    bool degenerate = false;
    bool ok = true;
    std::string diagnostic;
};

struct LDOptions {
    double fd_step = 1e-3;
    bool richardson = true;
};

inline constexpr double kMinFlux = 1e-12;

namespace detail {

template <class LambdaFn>
void fill_derivatives(LDPoint& pt, double lambda0, LambdaFn&& lambda_at, const LDOptions& opt) {
    const double s = pt.s;
    auto first = [&](double h) { return (lambda_at(s + h) - lambda_at(s - h)) / (2.0 * h); };
    auto second = [&](double h) {
        return (lambda_at(s + h) - 2.0 * lambda0 + lambda_at(s - h)) / (h * h);
    };
    const double h = opt.fd_step;
    if (opt.richardson) {
        pt.flux = (4.0 * first(0.5 * h) - first(h)) / 3.0;
        pt.second_cumulant = (4.0 * second(0.5 * h) - second(h)) / 3.0;
    } else {
        pt.flux = first(h);
        pt.second_cumulant = second(h);
    }
    pt.shot_noise = 2.0 * std::abs(pt.second_cumulant);
    if (pt.flux > kMinFlux) {
        pt.fano = -pt.second_cumulant / pt.flux;
        pt.mandel_q = *pt.fano - 1.0;
    }
}

}  // namespace detail

/// lambda(s) and the flux/noise quantities at one value of s, for a fixed
/// effective rate.
inline LDPoint ld_point(const AtomModel& model, double gamma_eff, double s,
                        const LDOptions& opt = {}) {
    if (!(opt.fd_step > 0.0)) {
        throw std::invalid_argument("ld_point: fd_step must be > 0");
    }
    if (!std::isfinite(s)) {
        throw std::invalid_argument("ld_point: s must be finite");
    }
    const GeneratorParts parts = generator_parts(model, gamma_eff);
    auto lambda_at = [&](double sv) {
        TiltedGenerator g{sv, gamma_eff, model.dim, parts.no_jump + std::exp(-sv) * parts.recycling};
        return characteristic_function(g).lambda;
    };
    LDPoint pt;
    pt.s = s;
    const Characteristic ch =
        characteristic_function({s, gamma_eff, model.dim, parts.no_jump + std::exp(-s) * parts.recycling});
    pt.lambda = ch.lambda;
    pt.gap = ch.gap;
    pt.degenerate = ch.degenerate;
    if (ch.degenerate) {
        pt.diagnostic = "degenerate dominant eigenvalue (spectral gap below 1e-10)";
    }
    detail::fill_derivatives(pt, ch.lambda, lambda_at, opt);
    if (!pt.mandel_q) {
        if (!pt.diagnostic.empty()) {
            pt.diagnostic += "; ";
        }
        pt.diagnostic += "flux below 1e-12, Fano and Q undefined";
    }
    return pt;
}

inline LDPoint ld_point(const AtomModel& model, const DetectionParams& det, double s,
                        const LDOptions& opt = {}) {
    return ld_point(model, effective_rate(det), s, opt);
}

inline void require_strictly_increasing(const std::vector<double>& grid, const char* where) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i])) {
            throw std::invalid_argument(std::string(where) + ": grid values must be finite");
        }
        if (i > 0 && !(grid[i] > grid[i - 1])) {
            throw std::invalid_argument(std::string(where) + ": grid must be strictly increasing");
        }
    }
}

/// One LDPoint per grid value, in grid order. A failing point is returned
/// with ok = false and its diagnostic; the remaining points still run.
inline std::vector<LDPoint> sweep(const AtomModel& model, double gamma_eff,
                                  const std::vector<double>& s_grid, const LDOptions& opt = {},
                                  unsigned threads = 1) {
    require_strictly_increasing(s_grid, "sweep");
    std::vector<LDPoint> out(s_grid.size());
    parallel_for(s_grid.size(), threads, [&](std::size_t i) {
        try {
            out[i] = ld_point(model, gamma_eff, s_grid[i], opt);
        } catch (const std::exception& e) {
            LDPoint bad;
            bad.s = s_grid[i];
            bad.ok = false;
            bad.lambda = bad.flux = bad.second_cumulant = bad.shot_noise = bad.gap =
                std::numeric_limits<double>::quiet_NaN();
            bad.diagnostic = e.what();
            out[i] = bad;
        }
    });
    return out;
}

inline std::vector<LDPoint> sweep(const AtomModel& model, const DetectionParams& det,
                                  const std::vector<double>& s_grid, const LDOptions& opt = {},
                                  unsigned threads = 1) {
    return sweep(model, effective_rate(det), s_grid, opt, threads);
}

/// n points evenly spaced on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n == 0) {
        return {};
    }
    if (n == 1) {
        return {lo};
    }
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    v.back() = hi;
    return v;
}

}  // namespace nmcount
