#pragma once

// Run configuration for the nmcount command line tool.
//
// JSON layout (all rates in units of 1/time, times in the matching unit;
// the usual choice is Gamma = 1):
//
//   model:     kind ("two_level" | "three_level"), delta | delta1, delta2 [rate],
//              omega | omega1 [rate] or omega_rule {reference_x, gamma_eff_per_omega},
//              omega2 [rate] or omega2_per_omega1, initial ("ground" | "excited")
//   detection: gamma [rate], lambda_bw [rate], d [dimensionless],
//              exactly one of tau [time] or x [dimensionless, number or list]
//   analysis:  s_grid (list or {min, max, points}), fd_step, x_grid (list or
//              {min, max, points, spacing: "log" | "linear", include_zero}),
//              t_final [time], pn_dt [time], outputs, pn_initial ("model" | "stationary"),
//              trajectories, horizon [time], window [time], warmup [time], seed, threads
//   output:    dir

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nmcount/atom_models.hpp"
#include "nmcount/detection.hpp"
#include "nmcount/ld_solver.hpp"

namespace nmcount {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/// Rabi coupling fixed by gamma_eff(reference_x) = gamma_eff_per_omega * omega.
struct OmegaRule {
    double reference_x = 20.0;
    double gamma_eff_per_omega = 4.0;

    double resolve(double gamma, double d) const {
        return effective_rate(reference_x, d, gamma) / gamma_eff_per_omega;
    }
};

struct ModelConfig {
    std::string kind = "two_level";
    double delta1 = 0.0;  ///< delta for two_level
    double delta2 = 0.0;
    std::optional<double> omega1;  ///< omega for two_level
    std::optional<OmegaRule> omega_rule;
    std::optional<double> omega2;
    double omega2_per_omega1 = 0.1;
    std::string initial = "ground";
};

struct DetectionConfig {
    double gamma = 1.0;
    double lambda_bw = 1e4;
    double d = 0.0;
    std::optional<double> tau;
    std::vector<double> x_values;  ///< resolved: one entry when tau is given
};

struct AnalysisConfig {
    std::vector<double> s_grid;
    double fd_step = 1e-3;
    std::vector<double> x_grid;
    double t_final = 50.0;
    std::optional<double> pn_dt;
    std::size_t outputs = 1;
    std::string pn_initial = "model";
    std::size_t trajectories = 1000;
    double horizon = 50.0;
    std::optional<double> window;
    double warmup = 0.0;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct RunConfig {
    ModelConfig model;
    DetectionConfig detection;
    AnalysisConfig analysis;
    std::string output_dir = "out";

    double omega1() const {
        if (model.omega1) return *model.omega1;
        return model.omega_rule.value_or(OmegaRule{}).resolve(detection.gamma, detection.d);
    }
    double omega2() const {
        return model.omega2 ? *model.omega2 : model.omega2_per_omega1 * omega1();
    }

    AtomModel atom() const {
        AtomModel m = model.kind == "two_level"
                          ? two_level(model.delta1, omega1())
                          : three_level(model.delta1, model.delta2, omega1(), omega2());
        if (model.initial == "excited") {
            m = m.with_initial_state(basis_state(m.dim, m.emitting_level));
        }
        return m;
    }

    DetectionParams detection_at(double x) const {
        return DetectionParams::from_x(detection.gamma, detection.lambda_bw, x, detection.d);
    }

    void validate() const;
    json to_json() const;
};

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const char* section) {
    if (!obj.is_object()) {
        throw std::invalid_argument(std::string("config: section '") + section + "' must be an object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw std::invalid_argument(std::string("config: unknown key '") + it.key() +
                                        "' in section '" + section + "'");
        }
    }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        out = obj.at(key).get<T>();
    }
}

template <class T>
void read(const json& obj, const char* key, std::optional<T>& out) {
    if (obj.contains(key) && !obj.at(key).is_null()) {
        out = obj.at(key).get<T>();
    }
}

inline std::vector<double> logspace(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(hi > lo)) {
        throw std::invalid_argument("config: log grid needs 0 < min < max");
    }
    auto exps = linspace(std::log10(lo), std::log10(hi), n);
    std::vector<double> v;
    v.reserve(n);
    for (double e : exps) v.push_back(std::pow(10.0, e));
    v.front() = lo;
    v.back() = hi;
    return v;
}

inline std::vector<double> read_grid(const json& g, const char* name, bool allow_log) {
    if (g.is_array()) {
        return g.get<std::vector<double>>();
    }
    if (!g.is_object()) {
        throw std::invalid_argument(std::string("config: ") + name + " must be a list or an object");
    }
    reject_unknown(g, {"min", "max", "points", "spacing", "include_zero"}, name);
    const double lo = g.at("min").get<double>();
    const double hi = g.at("max").get<double>();
    const auto n = g.at("points").get<std::size_t>();
    if (n < 2 || !(hi > lo)) {
        throw std::invalid_argument(std::string("config: ") + name + " needs points >= 2 and max > min");
    }
    const std::string spacing = g.value("spacing", "linear");
    std::vector<double> v;
    if (spacing == "log") {
        if (!allow_log) {
            throw std::invalid_argument(std::string("config: ") + name + " does not support log spacing");
        }
        v = logspace(lo, hi, n);
    } else if (spacing == "linear") {
        v = linspace(lo, hi, n);
    } else {
        throw std::invalid_argument(std::string("config: unknown spacing '") + spacing + "'");
    }
    if (g.value("include_zero", false)) {
        v.insert(v.begin(), 0.0);
    }
    return v;
}

}  // namespace detail

inline void RunConfig::validate() const {
    if (model.kind != "two_level" && model.kind != "three_level") {
        throw std::invalid_argument("config: model.kind must be two_level or three_level");
    }
    if (model.initial != "ground" && model.initial != "excited") {
        throw std::invalid_argument("config: model.initial must be ground or excited");
    }
    if (analysis.pn_initial != "model" && analysis.pn_initial != "stationary") {
        throw std::invalid_argument("config: analysis.pn_initial must be model or stationary");
    }
    if (detection.x_values.empty()) {
        throw std::invalid_argument("config: detection needs tau or x");
    }
    for (double x : detection.x_values) {
        detection_at(x).validate();
    }
    require_strictly_increasing(analysis.s_grid, "config: analysis.s_grid");
    require_strictly_increasing(analysis.x_grid, "config: analysis.x_grid");
    for (double x : analysis.x_grid) {
        if (!(x >= 0.0)) throw std::invalid_argument("config: analysis.x_grid values must be >= 0");
    }
    if (!(analysis.fd_step > 0.0)) throw std::invalid_argument("config: analysis.fd_step must be > 0");
    if (!(analysis.t_final >= 0.0)) throw std::invalid_argument("config: analysis.t_final must be >= 0");
    if (analysis.outputs == 0) throw std::invalid_argument("config: analysis.outputs must be >= 1");
    if (!(analysis.horizon > 0.0)) throw std::invalid_argument("config: analysis.horizon must be > 0");
    if (!(analysis.warmup >= 0.0)) throw std::invalid_argument("config: analysis.warmup must be >= 0");
    if (analysis.trajectories < 2) throw std::invalid_argument("config: analysis.trajectories must be >= 2");
    if (analysis.threads == 0) throw std::invalid_argument("config: analysis.threads must be >= 1");
    if (model.omega1 && model.omega_rule) {
        throw std::invalid_argument("config: give either omega or omega_rule, not both");
    }
    atom();
}

inline RunConfig parse_config(const json& root) {
    detail::reject_unknown(root, {"model", "detection", "analysis", "output"}, "root");
    RunConfig cfg;

    const json model = root.value("model", json::object());
    detail::reject_unknown(model, {"kind", "delta", "delta1", "delta2", "omega", "omega1", "omega2",
                                   "omega_rule", "omega2_per_omega1", "initial"},
                           "model");
    detail::read(model, "kind", cfg.model.kind);
    detail::read(model, "delta", cfg.model.delta1);
    detail::read(model, "delta1", cfg.model.delta1);
    detail::read(model, "delta2", cfg.model.delta2);
    detail::read(model, "omega", cfg.model.omega1);
    detail::read(model, "omega1", cfg.model.omega1);
    detail::read(model, "omega2", cfg.model.omega2);
    detail::read(model, "omega2_per_omega1", cfg.model.omega2_per_omega1);
    detail::read(model, "initial", cfg.model.initial);
    if (model.contains("omega_rule")) {
        const json& r = model.at("omega_rule");
        detail::reject_unknown(r, {"reference_x", "gamma_eff_per_omega"}, "model.omega_rule");
        OmegaRule rule;
        detail::read(r, "reference_x", rule.reference_x);
        detail::read(r, "gamma_eff_per_omega", rule.gamma_eff_per_omega);
        if (!(rule.reference_x >= 0.0) || !(rule.gamma_eff_per_omega > 0.0)) {
            throw std::invalid_argument("config: omega_rule needs reference_x >= 0 and gamma_eff_per_omega > 0");
        }
        cfg.model.omega_rule = rule;
    }
    if (!cfg.model.omega1 && !cfg.model.omega_rule) {
        cfg.model.omega_rule = OmegaRule{};
    }

    const json det = root.value("detection", json::object());
    detail::reject_unknown(det, {"gamma", "lambda_bw", "d", "tau", "x"}, "detection");
    detail::read(det, "gamma", cfg.detection.gamma);
    detail::read(det, "lambda_bw", cfg.detection.lambda_bw);
    detail::read(det, "d", cfg.detection.d);
    detail::read(det, "tau", cfg.detection.tau);
    const bool has_x = det.contains("x") && !det.at("x").is_null();
    if (has_x == cfg.detection.tau.has_value()) {
        throw std::invalid_argument("config: detection needs exactly one of tau or x");
    }
    if (has_x) {
        const json& x = det.at("x");
        cfg.detection.x_values = x.is_array() ? x.get<std::vector<double>>()
                                              : std::vector<double>{x.get<double>()};
    } else {
        cfg.detection.x_values = {cfg.detection.lambda_bw * *cfg.detection.tau};
    }

    const json an = root.value("analysis", json::object());
    detail::reject_unknown(an, {"s_grid", "fd_step", "x_grid", "t_final", "pn_dt", "outputs",
                                "pn_initial", "trajectories", "horizon", "window", "warmup", "seed",
                                "threads"},
                           "analysis");
    cfg.analysis.s_grid = an.contains("s_grid") ? detail::read_grid(an.at("s_grid"), "s_grid", false)
                                                : linspace(-1.0, 1.5, 101);
    cfg.analysis.x_grid = an.contains("x_grid")
                              ? detail::read_grid(an.at("x_grid"), "x_grid", true)
                              : [] {
                                    auto v = detail::logspace(1e-3, 1e3, 50);
                                    v.insert(v.begin(), 0.0);
                                    return v;
                                }();
    detail::read(an, "fd_step", cfg.analysis.fd_step);
    detail::read(an, "t_final", cfg.analysis.t_final);
    detail::read(an, "pn_dt", cfg.analysis.pn_dt);
    detail::read(an, "outputs", cfg.analysis.outputs);
    detail::read(an, "pn_initial", cfg.analysis.pn_initial);
    detail::read(an, "trajectories", cfg.analysis.trajectories);
    detail::read(an, "horizon", cfg.analysis.horizon);
    detail::read(an, "window", cfg.analysis.window);
    detail::read(an, "warmup", cfg.analysis.warmup);
    detail::read(an, "seed", cfg.analysis.seed);
    detail::read(an, "threads", cfg.analysis.threads);

    const json out = root.value("output", json::object());
    detail::reject_unknown(out, {"dir"}, "output");
    detail::read(out, "dir", cfg.output_dir);

    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("config: cannot open '" + path + "'");
    }
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config: " + path + ": " + e.what());
    }
    return parse_config(root);
}

/// Fully resolved configuration, defaults filled in. Thread count and output
/// directory are left out: they never change results.
inline json RunConfig::to_json() const {
    json m{{"kind", model.kind}, {"initial", model.initial}};
    if (model.kind == "two_level") {
        m["delta"] = model.delta1;
        m["omega"] = omega1();
    } else {
        m["delta1"] = model.delta1;
        m["delta2"] = model.delta2;
        m["omega1"] = omega1();
        m["omega2"] = omega2();
    }
    if (model.omega_rule) {
        m["omega_rule"] = {{"reference_x", model.omega_rule->reference_x},
                           {"gamma_eff_per_omega", model.omega_rule->gamma_eff_per_omega}};
    }
    json d{{"gamma", detection.gamma},
           {"lambda_bw", detection.lambda_bw},
           {"d", detection.d},
           {"x", detection.x_values}};
    json taus = json::array();
    for (double x : detection.x_values) taus.push_back(x / detection.lambda_bw);
    d["tau"] = taus;
    json a{{"s_grid", analysis.s_grid},     {"fd_step", analysis.fd_step},
           {"x_grid", analysis.x_grid},     {"t_final", analysis.t_final},
           {"outputs", analysis.outputs},   {"pn_initial", analysis.pn_initial},
           {"trajectories", analysis.trajectories},
           {"horizon", analysis.horizon},   {"warmup", analysis.warmup},
           {"seed", analysis.seed}};
    if (analysis.pn_dt) a["pn_dt"] = *analysis.pn_dt;
    if (analysis.window) a["window"] = *analysis.window;
    return json{{"model", m}, {"detection", d}, {"analysis", a}};
}

}  // namespace nmcount
