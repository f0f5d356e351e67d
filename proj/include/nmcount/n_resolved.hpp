#pragma once

// Count-resolved master equation on a truncated ladder n = 0..n_max:
//     d/dt rho_n = -i[H, rho_n] - g/2 {J^+ J, rho_n} + g J rho_{n-1} J^+.
// The top rung also keeps its own jumps, so Sum_n Tr rho_n is conserved and
// the mass parked there measures the truncation error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nmcount/atom_models.hpp"
#include "nmcount/errors.hpp"
#include "nmcount/linalg.hpp"

namespace nmcount {

struct CountResolvedState {
    double t = 0.0;
    std::vector<CMatrix> rhos;  ///< rho_n for n = 0..n_max

    std::size_t n_max() const { return rhos.empty() ? 0 : rhos.size() - 1; }
    double probability(std::size_t n) const {
        return n < rhos.size() ? rhos[n].trace().real() : 0.0;
    }
    double tail_mass() const { return rhos.empty() ? 0.0 : probability(n_max()); }
    CMatrix total() const {
        CMatrix sum = CMatrix::Zero(rhos.front().rows(), rhos.front().cols());
        for (const auto& r : rhos) {
            sum += r;
        }
        return sum;
    }
};

struct EvolveOptions {
    std::size_t n_max = 0;      ///< 0: ceil(5 g t) + 10
    std::size_t n_max_cap = 0;  ///< 0: ceil(10 g t) + 50
    double tail_tolerance = 1e-10;
    std::size_t outputs = 1;    ///< number of evenly spaced output times in (0, t_final]
};

inline constexpr double kStepBound = 0.05;

namespace detail {

inline void check_density_matrix(const CMatrix& rho, Eigen::Index dim, const char* where) {
    std::ostringstream os;
    if (rho.rows() != dim || rho.cols() != dim) {
        os << where << ": density matrix must be " << dim << "x" << dim;
    } else if (!rho.allFinite()) {
        os << where << ": density matrix has non-finite entries";
    } else if (hermiticity_defect(rho) > 1e-10) {
        os << where << ": density matrix not Hermitian";
    } else if (std::abs(rho.trace() - Complex(1.0)) > 1e-10) {
        os << where << ": density matrix trace is " << rho.trace();
    } else {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho + rho.adjoint()));
        if (es.eigenvalues().minCoeff() < -1e-10) {
            os << where << ": density matrix not positive semidefinite";
        }
    }
    if (!os.str().empty()) {
        throw std::invalid_argument(os.str());
    }
}

inline void check_ladder(const CountResolvedState& st) {
    double total = 0.0;
    for (std::size_t n = 0; n < st.rhos.size(); ++n) {
        const CMatrix& r = st.rhos[n];
        if (!r.allFinite()) {
            throw NumericalError("evolve: ladder contains non-finite entries");
        }
        if (hermiticity_defect(r) > 1e-10) {
            std::ostringstream os;
            os << "evolve: rho_" << n << " lost hermiticity at t = " << st.t;
            throw NumericalError(os.str());
        }
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (r + r.adjoint()), Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10) {
            std::ostringstream os;
            os << "evolve: rho_" << n << " lost positivity at t = " << st.t << " (min eigenvalue "
               << es.eigenvalues().minCoeff() << ")";
            throw NumericalError(os.str());
        }
        total += r.trace().real();
    }
    if (std::abs(total - 1.0) > 1e-8) {
        std::ostringstream os;
        os << "evolve: total probability drifted to " << total << " at t = " << st.t;
        throw NumericalError(os.str());
    }
}

class LadderRk4 {
public:
    LadderRk4(const AtomModel& model, double gamma_eff)
        : heff_(model.hamiltonian - kI * (0.5 * gamma_eff) * model.jump_op.adjoint() * model.jump_op),
          heff_adj_(heff_.adjoint()),
          jump_(std::sqrt(gamma_eff) * model.jump_op),
          jump_adj_(jump_.adjoint()) {}

    void derivative(const std::vector<CMatrix>& in, std::vector<CMatrix>& out) const {
        const std::size_t top = in.size() - 1;
        for (std::size_t n = 0; n <= top; ++n) {
            out[n].noalias() = -kI * (heff_ * in[n]);
            out[n].noalias() += kI * (in[n] * heff_adj_);
            if (n > 0) {
                out[n].noalias() += jump_ * in[n - 1] * jump_adj_;
            }
        }
        out[top].noalias() += jump_ * in[top] * jump_adj_;
    }

    void step(std::vector<CMatrix>& y, double h) {
        const std::size_t m = y.size();
        resize(m, y.front().rows());
        derivative(y, k1_);
        for (std::size_t n = 0; n < m; ++n) tmp_[n] = y[n] + (0.5 * h) * k1_[n];
        derivative(tmp_, k2_);
        for (std::size_t n = 0; n < m; ++n) tmp_[n] = y[n] + (0.5 * h) * k2_[n];
        derivative(tmp_, k3_);
        for (std::size_t n = 0; n < m; ++n) tmp_[n] = y[n] + h * k3_[n];
        derivative(tmp_, k4_);
        for (std::size_t n = 0; n < m; ++n) {
            y[n] += (h / 6.0) * (k1_[n] + 2.0 * k2_[n] + 2.0 * k3_[n] + k4_[n]);
        }
    }

private:
    void resize(std::size_t m, Eigen::Index d) {
        if (k1_.size() == m) {
            return;
        }
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &tmp_}) {
            v->assign(m, CMatrix::Zero(d, d));
        }
    }

    CMatrix heff_, heff_adj_, jump_, jump_adj_;
    std::vector<CMatrix> k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace detail

/// Integrates the ladder from rho0 (all mass at n = 0) and returns the
/// states at `opt.outputs` evenly spaced times ending at t_final. The step
/// actually used is t_final / ceil(t_final / dt) <= dt.
inline std::vector<CountResolvedState> evolve_series(const AtomModel& model, double gamma_eff,
                                                     const CMatrix& rho0, double t_final,
                                                     double dt, const EvolveOptions& opt = {}) {
    model.validate();
    detail::check_density_matrix(rho0, model.dim, "evolve");
    if (!(gamma_eff >= 0.0) || !std::isfinite(gamma_eff)) {
        throw std::invalid_argument("evolve: gamma_eff must be finite and >= 0");
    }
    if (!(t_final >= 0.0) || !std::isfinite(t_final)) {
        throw std::invalid_argument("evolve: t_final must be finite and >= 0");
    }
    if (!(dt > 0.0)) {
        throw std::invalid_argument("evolve: dt must be > 0");
    }
    const double scale = operator_norm(model.hamiltonian) + gamma_eff;
    if (!(dt * scale < kStepBound)) {
        std::ostringstream os;
        os << "evolve: dt * (|H| + gamma_eff) = " << dt * scale << " violates the bound "
           << kStepBound << "; use dt < " << kStepBound / scale;
        throw std::invalid_argument(os.str());
    }
    if (opt.outputs == 0) {
        throw std::invalid_argument("evolve: need at least one output time");
    }

    const double mean_scale = gamma_eff * t_final;
    std::size_t n_max = opt.n_max ? opt.n_max : static_cast<std::size_t>(std::ceil(5.0 * mean_scale)) + 10;
    const std::size_t cap =
        opt.n_max_cap ? opt.n_max_cap : static_cast<std::size_t>(std::ceil(10.0 * mean_scale)) + 50;
    n_max = std::min(n_max, cap);

    // Steps per output interval, so outputs land on step boundaries.
    const std::size_t total_steps =
        t_final == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(t_final / dt - 1e-12));
    const std::size_t per_output =
        std::max<std::size_t>(1, (total_steps + opt.outputs - 1) / opt.outputs);
    const std::size_t steps = t_final == 0.0 ? 0 : per_output * opt.outputs;
    const double h = steps ? t_final / static_cast<double>(steps) : 0.0;

    for (;;) {
        std::vector<CountResolvedState> series;
        std::vector<CMatrix> ladder(n_max + 1, CMatrix::Zero(model.dim, model.dim));
        ladder[0] = rho0;
        detail::LadderRk4 rk(model, gamma_eff);
        if (steps == 0) {
            series.push_back({0.0, ladder});
        }
        for (std::size_t k = 1; k <= steps; ++k) {
            rk.step(ladder, h);
            if (k % per_output == 0) {
                const double t = k == steps ? t_final : h * static_cast<double>(k);
                series.push_back({t, ladder});
            }
        }
        const double tail = series.back().tail_mass();
        if (tail < opt.tail_tolerance) {
            for (const auto& st : series) {
                detail::check_ladder(st);
            }
            return series;
        }
        if (n_max >= cap) {
            std::ostringstream os;
            os << "evolve: tail mass " << tail << " at n_max = " << n_max
               << " still exceeds " << opt.tail_tolerance << " at the cap";
            throw TruncationError(os.str());
        }
        n_max = std::min(2 * n_max, cap);
    }
}

inline CountResolvedState evolve(const AtomModel& model, double gamma_eff, const CMatrix& rho0,
                                 double t_final, double dt, EvolveOptions opt = {}) {
    opt.outputs = 1;
    return evolve_series(model, gamma_eff, rho0, t_final, dt, opt).back();
}

/// (n, P(n,t)) for n up to the last rung carrying nonzero probability.
inline std::vector<std::pair<std::size_t, double>> pn_distribution(const CountResolvedState& st) {
    std::size_t top = 0;
    for (std::size_t n = 0; n < st.rhos.size(); ++n) {
        if (st.probability(n) != 0.0) {
            top = n;
        }
    }
    std::vector<std::pair<std::size_t, double>> out;
    out.reserve(top + 1);
    for (std::size_t n = 0; n <= top; ++n) {
        out.emplace_back(n, st.probability(n));
    }
    return out;
}

namespace detail {

/// log(e^{-s n} P(n)) for rungs with P(n) > 0; -inf elsewhere.
inline std::vector<double> tilted_log_weights(const CountResolvedState& st, double s,
                                              double& max_log) {
    std::vector<double> logw(st.rhos.size(), -std::numeric_limits<double>::infinity());
    max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < st.rhos.size(); ++n) {
        const double p = st.probability(n);
        if (p > 0.0) {
            logw[n] = std::log(p) - s * static_cast<double>(n);
            max_log = std::max(max_log, logw[n]);
        }
    }
    if (!std::isfinite(max_log)) {
        throw NumericalError("count distribution carries no positive probability");
    }
    return logw;
}

}  // namespace detail

/// F(s,t) = -ln Sum_n e^{-s n} P(n,t), via log-sum-exp.
inline double finite_time_generating(const CountResolvedState& st, double s) {
    if (!std::isfinite(s)) {
        throw std::invalid_argument("finite_time_generating: s must be finite");
    }
    double m = 0.0;
    const auto logw = detail::tilted_log_weights(st, s, m);
    double acc = 0.0;
    for (double lw : logw) {
        acc += std::exp(lw - m);
    }
    return -(m + std::log(acc));
}

/// d^k F / ds^k for k = 1, 2, 3 from exact sums over the tilted distribution:
/// <n>_s, -<(n - n_s)^2>_s, <(n - n_s)^3>_s.
inline double finite_time_cumulants(const CountResolvedState& st, double s, int k) {
    if (k < 1 || k > 3) {
        throw std::invalid_argument("finite_time_cumulants: k must be 1, 2 or 3");
    }
    if (!std::isfinite(s)) {
        throw std::invalid_argument("finite_time_cumulants: s must be finite");
    }
    double m = 0.0;
    const auto logw = detail::tilted_log_weights(st, s, m);
    double z = 0.0;
    double mean = 0.0;
    for (std::size_t n = 0; n < logw.size(); ++n) {
        const double w = std::exp(logw[n] - m);
        z += w;
        mean += w * static_cast<double>(n);
    }
    mean /= z;
    if (k == 1) {
        return mean;
    }
    double c2 = 0.0;
    double c3 = 0.0;
    for (std::size_t n = 0; n < logw.size(); ++n) {
        const double w = std::exp(logw[n] - m) / z;
        const double dn = static_cast<double>(n) - mean;
        c2 += w * dn * dn;
        c3 += w * dn * dn * dn;
    }
    return k == 2 ? -c2 : c3;
}

}  // namespace nmcount
