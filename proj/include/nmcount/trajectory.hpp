#pragma once

// Stochastic click records for the windowed detection protocol. Each window
// dt = N tau either registers one click (apply sigma^-) or none (scale the
// emitting amplitude by abar(dt)); the drive propagator follows, then the
// state is renormalized.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "nmcount/atom_models.hpp"
#include "nmcount/detection.hpp"
#include "nmcount/errors.hpp"
#include "nmcount/linalg.hpp"
#include "nmcount/parallel.hpp"
#include "nmcount/rng.hpp"

namespace nmcount {

struct PureState {
    CVector amplitudes;

    double norm() const { return amplitudes.norm(); }
};

inline constexpr double kMaxClickProbability = 0.1;

/// Per-window operators, computed once per (model, detection, dt).
struct DetectionWindow {
    double dt = 0.0;
    Complex abar{1.0, 0.0};
    double jump_weight = 0.0;
    double gamma_eff = 0.0;
    double tau = 0.0;
    Eigen::Index emitting_level = 0;
    CMatrix drive;      ///< exp(-i H dt)
    CMatrix after_null; ///< drive * diag(1, .., abar, .., 1)
    CMatrix after_click;///< drive * sigma^-
};

/// True when dt is a positive integer multiple of tau (any dt > 0 if tau = 0).
inline bool is_window_multiple(double dt, double tau) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        return false;
    }
    if (tau == 0.0) {
        return true;
    }
    const double k = dt / tau;
    const double kr = std::round(k);
    return kr >= 1.0 && std::abs(k - kr) <= 1e-9 * std::max(1.0, kr);
}

inline DetectionWindow make_window(const AtomModel& model, const DetectionParams& det, double dt) {
    model.validate();
    det.validate();
    if (!is_window_multiple(dt, det.tau)) {
        std::ostringstream os;
        os << "detection window dt = " << dt << " is not a positive integer multiple of tau = "
           << det.tau;
        throw std::invalid_argument(os.str());
    }
    DetectionWindow w;
    w.dt = dt;
    w.tau = det.tau;
    w.abar = survival_amplitude(det, dt);
    w.jump_weight = jump_weight(det, dt);
    w.gamma_eff = effective_rate(det);
    w.emitting_level = model.emitting_level;
    w.drive = mat_exp(model.hamiltonian, dt, ExpMode::unitary);
    CMatrix m0 = CMatrix::Identity(model.dim, model.dim);
    m0(model.emitting_level, model.emitting_level) = w.abar;
    w.after_null = w.drive * m0;
    w.after_click = w.drive * model.jump_op;
    return w;
}

/// Largest multiple of tau whose click weight q(dt) stays at or below
/// `probability` for a fully excited atom.
inline double max_window_for(const DetectionParams& det, double probability) {
    const double g = effective_rate(det);
    if (g == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    const double dt = -std::log1p(-probability) / g;
    if (det.tau == 0.0) {
        return dt;
    }
    return std::floor(dt / det.tau) * det.tau;
}

struct StepResult {
    PureState state;
    int clicks = 0;  ///< Delta N_c, 0 or 1
};

/// One detection window applied with a prepared window.
inline StepResult step(const PureState& psi, const DetectionWindow& w, Rng& rng) {
    const Complex alpha = psi.amplitudes(w.emitting_level);
    const double p_click = w.jump_weight * std::norm(alpha);
    if (p_click > kMaxClickProbability) {
        const double excited = std::norm(alpha);
        double need = -std::log1p(-kMaxClickProbability / excited) / w.gamma_eff;
        if (w.tau > 0.0) {
            need = std::floor(need / w.tau) * w.tau;
        }
        std::ostringstream os;
        os << "window too large: click probability " << p_click << " exceeds "
           << kMaxClickProbability << "; need dt <= " << need;
        throw WindowTooLargeError(os.str(), need);
    }
    StepResult out;
    const double u = rng.uniform();
    if (u < p_click) {
        out.clicks = 1;
        out.state.amplitudes = w.after_click * psi.amplitudes;
    } else {
        out.state.amplitudes = w.after_null * psi.amplitudes;
    }
    const double n = out.state.amplitudes.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw NumericalError("step: state collapsed to zero norm");
    }
    out.state.amplitudes /= n;
    return out;
}

inline StepResult step(const PureState& psi, const AtomModel& model, const DetectionParams& det,
                       double dt, Rng& rng) {
    if (psi.amplitudes.size() != model.dim) {
        throw std::invalid_argument("step: state dimension does not match model");
    }
    return step(psi, make_window(model, det, dt), rng);
}

struct TrajectoryRecord {
    std::vector<double> click_times;
    std::vector<std::uint8_t> bin_counts;  ///< Delta N_c per window (empty if not recorded)
    std::size_t total_n = 0;
    std::uint64_t seed = 0;
    DetectionParams params;
    double dt = 0.0;
    double horizon = 0.0;
};

struct SimulateOptions {
    double warmup = 0.0;      ///< evolve this long before counting starts
    bool record_bins = true;
};

namespace detail {

inline std::size_t window_count(double span, double dt, const char* what) {
    if (span == 0.0) {
        return 0;
    }
    const double k = span / dt;
    const double kr = std::round(k);
    if (!(span > 0.0) || std::abs(k - kr) > 1e-9 * std::max(1.0, kr)) {
        std::ostringstream os;
        os << "simulate: " << what << " = " << span << " is not an integer multiple of dt = " << dt;
        throw std::invalid_argument(os.str());
    }
    return static_cast<std::size_t>(kr);
}

inline TrajectoryRecord run_record(const AtomModel& model, const DetectionParams& det,
                                   const DetectionWindow& w, double horizon, std::uint64_t seed,
                                   const SimulateOptions& opt) {
    const std::size_t warm = window_count(opt.warmup, w.dt, "warmup");
    const std::size_t windows = window_count(horizon, w.dt, "horizon");
    TrajectoryRecord rec;
    rec.seed = seed;
    rec.params = det;
    rec.dt = w.dt;
    rec.horizon = horizon;
    if (opt.record_bins) {
        rec.bin_counts.reserve(windows);
    }
    Rng rng(seed);
    PureState psi{model.initial_state};
    for (std::size_t k = 0; k < warm; ++k) {
        psi = step(psi, w, rng).state;
    }
    for (std::size_t k = 0; k < windows; ++k) {
        StepResult r = step(psi, w, rng);
        psi = std::move(r.state);
        if (r.clicks) {
            rec.click_times.push_back(w.dt * static_cast<double>(k + 1));
            ++rec.total_n;
        }
        if (opt.record_bins) {
            rec.bin_counts.push_back(static_cast<std::uint8_t>(r.clicks));
        }
    }
    return rec;
}

}  // namespace detail

/// One trajectory over (0, horizon]; click times are the ends of the
/// windows in which a click registered.
inline TrajectoryRecord simulate(const AtomModel& model, const DetectionParams& det, double horizon,
                                 double dt, std::uint64_t seed, const SimulateOptions& opt = {}) {
    const DetectionWindow w = make_window(model, det, dt);
    return detail::run_record(model, det, w, horizon, seed, opt);
}

/// `count` trajectories; trajectory i uses derive_seed(master_seed, i).
inline std::vector<TrajectoryRecord> simulate_ensemble(const AtomModel& model,
                                                       const DetectionParams& det, double horizon,
                                                       double dt, std::uint64_t master_seed,
                                                       std::size_t count,
                                                       const SimulateOptions& opt = {},
                                                       unsigned threads = 1) {
    const DetectionWindow w = make_window(model, det, dt);
    std::vector<TrajectoryRecord> out(count);
    parallel_for(count, threads, [&](std::size_t i) {
        out[i] = detail::run_record(model, det, w, horizon, derive_seed(master_seed, i), opt);
    });
    return out;
}

/// Default window: min(0.01 / gamma_eff, 0.1 / |H|) rounded down to a
/// multiple of tau (at least one tau).
inline double default_window(const AtomModel& model, const DetectionParams& det) {
    const double g = effective_rate(det);
    const double hn = operator_norm(model.hamiltonian);
    double dt = std::numeric_limits<double>::infinity();
    if (g > 0.0) dt = std::min(dt, 0.01 / g);
    if (hn > 0.0) dt = std::min(dt, 0.1 / hn);
    if (std::isinf(dt)) {
        dt = det.tau > 0.0 ? det.tau : 0.01;
    }
    if (det.tau > 0.0) {
        dt = std::max(1.0, std::floor(dt / det.tau)) * det.tau;
    }
    return dt;
}

struct EnsembleStats {
    std::size_t count = 0;
    double horizon = 0.0;
    double mean_n = 0.0;
    double var_n = 0.0;  ///< unbiased sample variance of total_n
    double rate = 0.0;   ///< mean_n / horizon
    double rate_se = 0.0;
    std::optional<double> fano;  ///< var_n / mean_n
    std::optional<double> fano_se;
    std::optional<double> mandel_q;  ///< fano - 1
};

/// Sample moments of total_n. Standard error of the Fano factor uses the
/// delta method with sample third and fourth central moments.
inline EnsembleStats ensemble_statistics(const std::vector<TrajectoryRecord>& records) {
    if (records.empty()) {
        throw std::invalid_argument("ensemble_statistics: no records");
    }
    if (records.size() < 2) {
        throw std::invalid_argument("ensemble_statistics: need at least two records");
    }
    const double horizon = records.front().horizon;
    for (const auto& r : records) {
        if (std::abs(r.horizon - horizon) > 1e-12 * std::max(1.0, horizon)) {
            throw std::invalid_argument("ensemble_statistics: records have different horizons");
        }
    }
    if (!(horizon > 0.0)) {
        throw std::invalid_argument("ensemble_statistics: horizon must be > 0");
    }
    const double n = static_cast<double>(records.size());
    double mean = 0.0;
    for (const auto& r : records) mean += static_cast<double>(r.total_n);
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (const auto& r : records) {
        const double d = static_cast<double>(r.total_n) - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m3 /= n;
    m4 /= n;
    const double var = m2 / (n - 1.0);

    EnsembleStats st;
    st.count = records.size();
    st.horizon = horizon;
    st.mean_n = mean;
    st.var_n = var;
    st.rate = mean / horizon;
    st.rate_se = std::sqrt(var / n) / horizon;
    if (mean > 0.0) {
        const double fano = var / mean;
        const double var_mean = var / n;
        const double var_var = std::max(0.0, (m4 - var * var * (n - 3.0) / (n - 1.0)) / n);
        const double cov = m3 / n;
        const double v = var_var / (mean * mean) + fano * fano * var_mean / (mean * mean) -
                         2.0 * fano * cov / (mean * mean);
        st.fano = fano;
        st.fano_se = std::sqrt(std::max(0.0, v));
        st.mandel_q = fano - 1.0;
    }
    return st;
}

/// Resamples k records with replacement, weights proportional to
/// e^{-s total_n}.
inline std::vector<TrajectoryRecord> select_subensemble(const std::vector<TrajectoryRecord>& records,
                                                        double s, std::size_t k, Rng& rng) {
    if (records.empty()) {
        throw std::invalid_argument("select_subensemble: no records");
    }
    if (!std::isfinite(s)) {
        throw std::invalid_argument("select_subensemble: s must be finite");
    }
    std::vector<double> logw(records.size());
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < records.size(); ++i) {
        logw[i] = -s * static_cast<double>(records[i].total_n);
        max_log = std::max(max_log, logw[i]);
    }
    std::vector<double> cumulative(records.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        acc += std::exp(logw[i] - max_log);
        cumulative[i] = acc;
    }
    if (!(acc > 0.0) || !std::isfinite(acc)) {
        throw NumericalError("select_subensemble: all weights underflow; use a smaller |s|");
    }
    std::vector<TrajectoryRecord> out;
    out.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double target = rng.uniform() * acc;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
        if (it == cumulative.end()) {
            --it;
        }
        out.push_back(records[static_cast<std::size_t>(it - cumulative.begin())]);
    }
    return out;
}

}  // namespace nmcount
