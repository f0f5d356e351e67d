#pragma once

// Subcommand drivers. Each writes CSV tables (header row, 17 significant
// digits) into cfg.output_dir and returns the paths it wrote. Every file
// starts with a '#' line, or a "meta" JSON member, carrying the version tag
// and the resolved configuration.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nmcount/config.hpp"
#include "nmcount/detection.hpp"
#include "nmcount/ld_solver.hpp"
#include "nmcount/n_resolved.hpp"
#include "nmcount/trajectory.hpp"

namespace nmcount {

namespace fs = std::filesystem;

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt17(*v) : "nan"; }

inline std::string x_tag(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "x%g", x);
    return buf;
}

inline json meta(const RunConfig& cfg, const char* command) {
    return json{{"tool", "nmcount"}, {"version", kVersion}, {"command", command},
                {"config", cfg.to_json()}};
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const RunConfig& cfg, const char* command,
              const std::string& header)
        : path_(path), out_(path, std::ios::binary) {
        if (!out_) {
            throw std::runtime_error("cannot write " + path.string());
        }
        out_ << "# " << meta(cfg, command).dump() << '\n' << header << '\n';
    }

    template <class... Cols>
    void row(const Cols&... cols) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cols, first = false), ...);
        out_ << '\n';
    }

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    std::ofstream out_;
};

inline void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

inline fs::path prepare_dir(const RunConfig& cfg) {
    fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    return dir;
}

/// Smallest count of dt-windows covering `span`.
inline double snap_to_windows(double span, double dt) {
    if (span <= 0.0) {
        return 0.0;
    }
    const double k = std::ceil(span / dt - 1e-9);
    return k * dt;
}

}  // namespace detail

/// Effective decay rate over the configured x grid.
inline std::vector<fs::path> cmd_gamma_eff(const RunConfig& cfg) {
    const fs::path dir = detail::prepare_dir(cfg);
    detail::CsvWriter csv(dir / "gamma_eff.csv", cfg, "gamma-eff", "x,gamma_eff");
    for (double x : cfg.analysis.x_grid) {
        csv.row(detail::fmt17(x),
                detail::fmt17(effective_rate(x, cfg.detection.d, cfg.detection.gamma)));
    }
    return {csv.path()};
}

/// Large-deviation sweep over the s grid, one table and one sidecar per x.
inline std::vector<fs::path> cmd_ld_sweep(const RunConfig& cfg) {
    const fs::path dir = detail::prepare_dir(cfg);
    const AtomModel model = cfg.atom();
    const LDOptions opt{cfg.analysis.fd_step, true};
    std::vector<fs::path> written;
    for (double x : cfg.detection.x_values) {
        const DetectionParams det = cfg.detection_at(x);
        const double g = effective_rate(det);
        const auto points = sweep(model, g, cfg.analysis.s_grid, opt, cfg.analysis.threads);

        const std::string stem = "ld_sweep_" + detail::x_tag(x);
        detail::CsvWriter csv(dir / (stem + ".csv"), cfg, "ld-sweep", "s,lambda,I,S,fano,Q,gap");
        json notes = json::array();
        for (const auto& p : points) {
            csv.row(detail::fmt17(p.s), detail::fmt17(p.lambda), detail::fmt17(p.flux),
                    detail::fmt17(p.shot_noise), detail::fmt_opt(p.fano), detail::fmt_opt(p.mandel_q),
                    detail::fmt17(p.gap));
            if (!p.ok || !p.diagnostic.empty()) {
                notes.push_back({{"s", p.s}, {"ok", p.ok}, {"diagnostic", p.diagnostic}});
            }
        }
        json side = detail::meta(cfg, "ld-sweep");
        side["x"] = x;
        side["tau"] = det.tau;
        side["gamma_eff"] = g;
        side["omega1"] = cfg.omega1();
        if (cfg.model.kind == "three_level") side["omega2"] = cfg.omega2();
        side["diagnostics"] = notes;
        detail::write_json(dir / (stem + ".json"), side);
        written.push_back(csv.path());
        written.push_back(dir / (stem + ".json"));
    }
    return written;
}

/// Count-resolved evolution; rows (t, n, P(n,t)) at each output time.
inline std::vector<fs::path> cmd_pn_evolve(const RunConfig& cfg) {
    const fs::path dir = detail::prepare_dir(cfg);
    const AtomModel model = cfg.atom();
    std::vector<fs::path> written;
    for (double x : cfg.detection.x_values) {
        const DetectionParams det = cfg.detection_at(x);
        const double g = effective_rate(det);
        const CMatrix rho0 =
            cfg.analysis.pn_initial == "stationary" ? stationary_state(model, g) : model.initial_density();
        const double scale = operator_norm(model.hamiltonian) + g;
        const double dt = cfg.analysis.pn_dt.value_or(scale > 0.0 ? 0.1 * kStepBound / scale : 1.0);
        EvolveOptions eo;
        eo.outputs = cfg.analysis.outputs;
        const auto series = evolve_series(model, g, rho0, cfg.analysis.t_final, dt, eo);

        const std::string stem = "pn_evolve_" + detail::x_tag(x);
        detail::CsvWriter csv(dir / (stem + ".csv"), cfg, "pn-evolve", "t,n,P");
        for (const auto& st : series) {
            for (const auto& [n, p] : pn_distribution(st)) {
                csv.row(detail::fmt17(st.t), n, detail::fmt17(p));
            }
        }
        const auto& last = series.back();
        json side = detail::meta(cfg, "pn-evolve");
        side["x"] = x;
        side["gamma_eff"] = g;
        side["dt"] = dt;
        side["n_max"] = last.n_max();
        side["tail_mass"] = last.tail_mass();
        side["mean_n"] = finite_time_cumulants(last, 0.0, 1);
        side["variance_n"] = -finite_time_cumulants(last, 0.0, 2);
        detail::write_json(dir / (stem + ".json"), side);
        written.push_back(csv.path());
        written.push_back(dir / (stem + ".json"));
    }
    return written;
}

/// Click records for an ensemble of trajectories plus a summary that checks
/// the empirical rate against the long-time flux I(0).
inline std::vector<fs::path> cmd_trajectories(const RunConfig& cfg) {
    const fs::path dir = detail::prepare_dir(cfg);
    const AtomModel model = cfg.atom();
    std::vector<fs::path> written;
    for (double x : cfg.detection.x_values) {
        const DetectionParams det = cfg.detection_at(x);
        const double dt = cfg.analysis.window.value_or(default_window(model, det));
        const double horizon = detail::snap_to_windows(cfg.analysis.horizon, dt);
        const double warmup = detail::snap_to_windows(cfg.analysis.warmup, dt);
        SimulateOptions so;
        so.warmup = warmup;
        so.record_bins = false;
        const auto records = simulate_ensemble(model, det, horizon, dt, cfg.analysis.seed,
                                               cfg.analysis.trajectories, so, cfg.analysis.threads);

        const std::string stem = "trajectories_" + detail::x_tag(x);
        detail::CsvWriter csv(dir / (stem + ".csv"), cfg, "trajectories", "trajectory,time");
        for (std::size_t i = 0; i < records.size(); ++i) {
            for (double t : records[i].click_times) {
                csv.row(i, detail::fmt17(t));
            }
        }

        const EnsembleStats st = ensemble_statistics(records);
        const LDPoint ref = ld_point(model, det, 0.0, {cfg.analysis.fd_step, true});
        const double z = st.rate_se > 0.0 ? (st.rate - ref.flux) / st.rate_se : 0.0;
        json side = detail::meta(cfg, "trajectories");
        side["summary"] = {
            {"x", x},
            {"gamma_eff", effective_rate(det)},
            {"window", dt},
            {"horizon", horizon},
            {"warmup", warmup},
            {"master_seed", cfg.analysis.seed},
            {"trajectories", st.count},
            {"mean_n", st.mean_n},
            {"variance_n", st.var_n},
            {"rate", st.rate},
            {"rate_se", st.rate_se},
            {"fano", st.fano ? json(*st.fano) : json(nullptr)},
            {"fano_se", st.fano_se ? json(*st.fano_se) : json(nullptr)},
            {"mandel_q", st.mandel_q ? json(*st.mandel_q) : json(nullptr)},
            {"ld_flux_s0", ref.flux},
            {"rate_deviation_in_se", z},
            {"within_3_se", std::abs(st.rate - ref.flux) <= 3.0 * st.rate_se},
        };
        detail::write_json(dir / (stem + "_summary.json"), side);
        written.push_back(csv.path());
        written.push_back(dir / (stem + "_summary.json"));
    }
    return written;
}

}  // namespace nmcount
