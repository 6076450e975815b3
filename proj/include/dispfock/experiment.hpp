#pragma once

// Batch experiments driven by a JSON config.
//
// Units live in the key names: *_hz values are cycles per second (multiplied by 2 pi internally),
// *_s are seconds, *_rad radians, *_per_s rates.  Modes are numbered from 1 in configs.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dispfock/analysis.hpp"
#include "dispfock/dynamics.hpp"
#include "dispfock/errors.hpp"
#include "dispfock/fock_space.hpp"
#include "dispfock/io.hpp"
#include "dispfock/measurement.hpp"
#include "dispfock/protocol.hpp"
#include "dispfock/rng.hpp"
#include "dispfock/svg.hpp"

namespace dispfock {

inline constexpr int config_schema_version = 1;

struct DriveConfig {
    double rabi = 0.0; // rad/s
    Sideband sideband = Sideband::blue;
    std::vector<std::pair<int, double>> steps; // (mode, sideband detuning rad/s), zero-based modes
    double ratio_target = std::numeric_limits<double>::quiet_NaN();
    double ratio_label = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::string protocol = "ramsey"; // ramsey | parity_filter | binary_filter | single_shot | calibrate | linearity
    std::uint64_t seed = 1;
    std::vector<ModeSpec> modes;
    std::vector<int> truncation; // per-mode dimension; empty: protocol default
    std::vector<DriveConfig> drives;
    Engine engine = Engine::effective;
    bool stark = true;
    std::vector<double> gamma;   // 1/s per mode
    double residual_shift = 0.0; // rad/s
    json state = json{{"kind", "fock"}, {"n", json::array({0})}};

    // time grid
    double t_stop = 0.0;
    double theta_max = 0.0;
    int points = 61;
    int shots = 0; // 0: noiseless

    bool fit = false;
    int fit_n_max = 6;
    bool fit_nonlinear = false;

    // filters and single-shot
    Parity sector = Parity::even;
    std::vector<int> mask;
    Occupation target;
    std::vector<int> bits;
    PhaseMode phase_mode = PhaseMode::exact;
    DetectionModel detection = DetectionModel::perfect();
    int n_max = 5;

    std::string calibrate_kind = "offset";
    double t_cal = 4e-3;
};

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) { return base + "/" + key; }

template <class T>
T get_or(const json& j, const std::string& key, const std::string& path, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw SchemaError(join_path(path, key) + ": wrong type");
    }
}

template <class T>
T require(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(join_path(path, key) + ": required key missing");
    return get_or<T>(j, key, path, T{});
}

inline void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw SchemaError(join_path(path, it.key()) + ": unknown key");
    }
}

inline Sideband parse_sideband(const std::string& s, const std::string& path) {
    if (s == "blue") return Sideband::blue;
    if (s == "red") return Sideband::red;
    throw SchemaError(path + ": sideband must be 'blue' or 'red'");
}

inline Engine parse_engine(const std::string& s, const std::string& path) {
    if (s == "ideal") return Engine::ideal;
    if (s == "effective") return Engine::effective;
    if (s == "effective_nonlinear") return Engine::effective_nonlinear;
    if (s == "jc_linear") return Engine::jc_linear;
    if (s == "jc_nonlinear") return Engine::jc_nonlinear;
    throw SchemaError(path + ": unknown engine '" + s + "'");
}

inline int parse_mode(const json& j, const std::string& key, const std::string& path, int mode_count) {
    const int m = require<int>(j, key, path);
    if (m < 1 || m > mode_count) throw SchemaError(join_path(path, key) + ": mode must lie in [1, " + std::to_string(mode_count) + "]");
    return m - 1;
}

inline void check_state_spec(const json& s, const std::string& path, int mode_count) {
    const auto kind = require<std::string>(s, "kind", path);
    if (kind == "fock") {
        check_keys(s, {"kind", "n"}, path);
        const auto n = require<std::vector<int>>(s, "n", path);
        if (static_cast<int>(n.size()) != mode_count) throw SchemaError(path + "/n: one occupation per mode is required");
    } else if (kind == "coherent") {
        check_keys(s, {"kind", "alpha"}, path);
        const auto a = require<std::vector<double>>(s, "alpha", path);
        if (static_cast<int>(a.size()) != mode_count) throw SchemaError(path + "/alpha: one amplitude per mode is required");
    } else if (kind == "cat") {
        check_keys(s, {"kind", "alpha", "parity", "mode"}, path);
        require<double>(s, "alpha", path);
        parse_mode(s, "mode", path, mode_count);
        const auto p = require<std::string>(s, "parity", path);
        if (p != "even" && p != "odd") throw SchemaError(path + "/parity: must be 'even' or 'odd'");
    } else if (kind == "ecs") {
        check_keys(s, {"kind", "alpha", "parity"}, path);
        if (mode_count != 2) throw SchemaError(path + ": entangled coherent states need two modes");
        require<double>(s, "alpha", path);
        const auto p = require<std::string>(s, "parity", path);
        if (p != "even" && p != "odd") throw SchemaError(path + "/parity: must be 'even' or 'odd'");
    } else if (kind == "mixture") {
        check_keys(s, {"kind", "weight", "a", "b"}, path);
        const double w = require<double>(s, "weight", path);
        if (!(w >= 0.0 && w <= 1.0)) throw SchemaError(path + "/weight: must lie in [0, 1]");
        check_state_spec(s.at("a"), path + "/a", mode_count);
        check_state_spec(s.at("b"), path + "/b", mode_count);
    } else {
        throw SchemaError(path + "/kind: unknown state kind '" + kind + "'");
    }
}

} // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    using namespace detail;
    const std::string root = "";
    check_keys(j, {"schema_version", "name", "protocol", "seed", "trap", "truncation", "drives", "engine", "stark",
                   "decay_per_s", "residual_shift_hz", "state", "time_grid", "shots", "fit", "filter", "detection",
                   "single_shot", "calibrate", "linearity"},
               root);
    const int version = require<int>(j, "schema_version", root);
    if (version != config_schema_version)
        throw SchemaError("/schema_version: unsupported version " + std::to_string(version));

    ExperimentConfig c;
    c.name = get_or<std::string>(j, "name", root, c.name);
    c.protocol = require<std::string>(j, "protocol", root);
    static const std::vector<std::string> protocols{"ramsey", "parity_filter", "binary_filter", "single_shot", "calibrate", "linearity"};
    if (std::find(protocols.begin(), protocols.end(), c.protocol) == protocols.end())
        throw SchemaError("/protocol: unknown protocol '" + c.protocol + "'");
    c.seed = get_or<std::uint64_t>(j, "seed", root, c.seed);

    const json& trap = j.contains("trap") ? j.at("trap") : throw SchemaError("/trap: required key missing");
    check_keys(trap, {"modes"}, "/trap");
    const json& modes = trap.contains("modes") ? trap.at("modes") : throw SchemaError("/trap/modes: required key missing");
    if (!modes.is_array() || modes.empty()) throw SchemaError("/trap/modes: expected a non-empty array");
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const std::string p = "/trap/modes/" + std::to_string(k);
        check_keys(modes[k], {"frequency_hz", "eta"}, p);
        c.modes.push_back({two_pi * require<double>(modes[k], "frequency_hz", p), require<double>(modes[k], "eta", p)});
    }
    try {
        validate_modes(c.modes);
    } catch (const Error& e) {
        throw SchemaError(std::string("/trap/modes: ") + e.what());
    }
    const int mc = static_cast<int>(c.modes.size());

    c.truncation = get_or<std::vector<int>>(j, "truncation", root, {});
    if (!c.truncation.empty() && static_cast<int>(c.truncation.size()) != mc)
        throw SchemaError("/truncation: one dimension per mode is required");
    for (int d : c.truncation)
        if (d < 1) throw SchemaError("/truncation: dimensions must be >= 1");

    if (j.contains("drives")) {
        const json& ds = j.at("drives");
        if (!ds.is_array()) throw SchemaError("/drives: expected an array");
        for (std::size_t k = 0; k < ds.size(); ++k) {
            const std::string p = "/drives/" + std::to_string(k);
            check_keys(ds[k], {"rabi_hz", "sideband", "steps", "ratio_target", "ratio_label"}, p);
            DriveConfig d;
            d.rabi = two_pi * require<double>(ds[k], "rabi_hz", p);
            if (!(d.rabi > 0.0)) throw SchemaError(p + "/rabi_hz: must be positive");
            d.sideband = parse_sideband(get_or<std::string>(ds[k], "sideband", p, "blue"), p + "/sideband");
            d.ratio_target = get_or<double>(ds[k], "ratio_target", p, d.ratio_target);
            d.ratio_label = get_or<double>(ds[k], "ratio_label", p, d.ratio_label);
            if (ds[k].contains("steps")) {
                const json& st = ds[k].at("steps");
                if (!st.is_array() || st.size() != 2) throw SchemaError(p + "/steps: exactly two steps are required");
                for (std::size_t s = 0; s < 2; ++s) {
                    const std::string ps = p + "/steps/" + std::to_string(s);
                    check_keys(st[s], {"mode", "sideband_detuning_hz"}, ps);
                    d.steps.emplace_back(parse_mode(st[s], "mode", ps, mc),
                                         two_pi * require<double>(st[s], "sideband_detuning_hz", ps));
                }
            } else if (!std::isfinite(d.ratio_target)) {
                throw SchemaError(p + ": either steps or ratio_target is required");
            }
            c.drives.push_back(d);
        }
    }

    c.engine = parse_engine(get_or<std::string>(j, "engine", root, "effective"), "/engine");
    c.stark = get_or<bool>(j, "stark", root, true);
    c.gamma = get_or<std::vector<double>>(j, "decay_per_s", root, {});
    if (!c.gamma.empty() && static_cast<int>(c.gamma.size()) != mc)
        throw SchemaError("/decay_per_s: one rate per mode is required");
    for (double g : c.gamma)
        if (!(g >= 0.0)) throw SchemaError("/decay_per_s: rates must be >= 0");
    c.residual_shift = two_pi * get_or<double>(j, "residual_shift_hz", root, 0.0);

    if (j.contains("state")) {
        c.state = j.at("state");
    } else {
        c.state = json{{"kind", "fock"}, {"n", std::vector<int>(static_cast<std::size_t>(mc), 0)}};
    }
    check_state_spec(c.state, "/state", mc);

    if (j.contains("time_grid")) {
        const json& tg = j.at("time_grid");
        check_keys(tg, {"stop_s", "theta_max_rad", "points"}, "/time_grid");
        c.t_stop = get_or<double>(tg, "stop_s", "/time_grid", 0.0);
        c.theta_max = get_or<double>(tg, "theta_max_rad", "/time_grid", 0.0);
        c.points = get_or<int>(tg, "points", "/time_grid", c.points);
        if ((c.t_stop > 0.0) == (c.theta_max > 0.0))
            throw SchemaError("/time_grid: give exactly one of stop_s or theta_max_rad (positive)");
        if (c.points < 5) throw SchemaError("/time_grid/points: at least 5 points");
    }
    c.shots = get_or<int>(j, "shots", root, 0);
    if (c.shots < 0) throw SchemaError("/shots: must be >= 0");

    if (j.contains("fit")) {
        const json& f = j.at("fit");
        check_keys(f, {"enabled", "n_max", "nonlinear"}, "/fit");
        c.fit = get_or<bool>(f, "enabled", "/fit", true);
        c.fit_n_max = get_or<int>(f, "n_max", "/fit", c.fit_n_max);
        c.fit_nonlinear = get_or<bool>(f, "nonlinear", "/fit", false);
        if (c.fit_n_max < 0) throw SchemaError("/fit/n_max: must be >= 0");
    }

    if (j.contains("filter")) {
        const json& f = j.at("filter");
        check_keys(f, {"sector", "modes", "target", "bits", "phase_mode"}, "/filter");
        const auto sector = get_or<std::string>(f, "sector", "/filter", "even");
        if (sector != "even" && sector != "odd") throw SchemaError("/filter/sector: must be 'even' or 'odd'");
        c.sector = sector == "even" ? Parity::even : Parity::odd;
        for (int m : get_or<std::vector<int>>(f, "modes", "/filter", {1})) {
            if (m < 1 || m > mc) throw SchemaError("/filter/modes: mode out of range");
            c.mask.push_back(m - 1);
        }
        c.target = get_or<std::vector<int>>(f, "target", "/filter", {});
        if (!c.target.empty() && static_cast<int>(c.target.size()) != mc)
            throw SchemaError("/filter/target: one occupation per mode is required");
        c.bits = get_or<std::vector<int>>(f, "bits", "/filter", {});
        const auto pm = get_or<std::string>(f, "phase_mode", "/filter", "exact");
        if (pm != "exact" && pm != "paper") throw SchemaError("/filter/phase_mode: must be 'exact' or 'paper'");
        c.phase_mode = pm == "exact" ? PhaseMode::exact : PhaseMode::paper;
    }
    if (c.mask.empty()) c.mask.push_back(0);

    if (j.contains("detection")) {
        const json& d = j.at("detection");
        if (d.is_string()) {
            if (d.get<std::string>() != "perfect") throw SchemaError("/detection: string form must be 'perfect'");
        } else {
            check_keys(d, {"lambda_bright", "lambda_dark", "threshold_pass", "threshold_discriminate"}, "/detection");
            c.detection.lambda_bright = require<double>(d, "lambda_bright", "/detection");
            c.detection.lambda_dark = require<double>(d, "lambda_dark", "/detection");
            c.detection.threshold_pass = get_or<int>(d, "threshold_pass", "/detection", 0);
            c.detection.threshold_discriminate = get_or<int>(d, "threshold_discriminate", "/detection", 1);
            try {
                c.detection.validate();
            } catch (const Error& e) {
                throw SchemaError(std::string("/detection: ") + e.what());
            }
        }
    }

    if (j.contains("single_shot")) {
        const json& s = j.at("single_shot");
        check_keys(s, {"n_max", "phase_mode"}, "/single_shot");
        c.n_max = get_or<int>(s, "n_max", "/single_shot", c.n_max);
        const auto pm = get_or<std::string>(s, "phase_mode", "/single_shot", "exact");
        if (pm != "exact" && pm != "paper") throw SchemaError("/single_shot/phase_mode: must be 'exact' or 'paper'");
        c.phase_mode = pm == "exact" ? PhaseMode::exact : PhaseMode::paper;
    }
    if (j.contains("linearity")) {
        const json& s = j.at("linearity");
        check_keys(s, {"n_max", "points"}, "/linearity");
        c.n_max = get_or<int>(s, "n_max", "/linearity", 6);
        c.points = get_or<int>(s, "points", "/linearity", c.points);
        if (c.points < 5) throw SchemaError("/linearity/points: at least 5 points");
    }
    if (c.n_max < 0 || c.n_max > 1000) throw SchemaError("n_max out of range");
    if (j.contains("calibrate")) {
        const json& s = j.at("calibrate");
        check_keys(s, {"kind", "t_cal_s"}, "/calibrate");
        c.calibrate_kind = get_or<std::string>(s, "kind", "/calibrate", "offset");
        if (c.calibrate_kind != "offset" && c.calibrate_kind != "tpi")
            throw SchemaError("/calibrate/kind: must be 'offset' or 'tpi'");
        c.t_cal = get_or<double>(s, "t_cal_s", "/calibrate", c.t_cal);
    }

    const bool needs_drive = c.protocol == "ramsey" || c.protocol == "calibrate" || c.protocol == "linearity";
    if (needs_drive && c.drives.empty()) throw SchemaError("/drives: protocol '" + c.protocol + "' needs at least one drive");
    if (c.protocol == "ramsey" && c.t_stop == 0.0 && c.theta_max == 0.0) throw SchemaError("/time_grid: required for ramsey");
    if (c.protocol == "binary_filter" && c.target.empty()) throw SchemaError("/filter/target: required for binary_filter");
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("cannot open config " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Building blocks

inline SpinMotionState build_state(const json& s, const HilbertSpace& space) {
    const auto kind = s.at("kind").get<std::string>();
    if (kind == "fock") return fock_state(space, s.at("n").get<std::vector<int>>());
    if (kind == "coherent") {
        std::vector<cplx> a;
        for (double x : s.at("alpha").get<std::vector<double>>()) a.emplace_back(x, 0.0);
        return coherent_state(space, a);
    }
    if (kind == "cat")
        return cat_state(space, s.at("alpha").get<double>(), s.at("parity").get<std::string>() == "even" ? 1 : -1,
                         s.at("mode").get<int>() - 1);
    if (kind == "ecs")
        return ecs_state(space, s.at("alpha").get<double>(), s.at("parity").get<std::string>() == "even" ? 1 : -1);
    if (kind == "mixture")
        return mixture(build_state(s.at("a"), space), s.at("weight").get<double>(), build_state(s.at("b"), space));
    throw SchemaError("/state/kind: unknown state kind '" + kind + "'");
}

inline DecouplingDrive build_drive(const ExperimentConfig& c, const DriveConfig& d) {
    if (!d.steps.empty())
        return drive_from_sideband_detunings(c.modes, d.rabi, d.steps[0].first, d.steps[0].second, d.steps[1].first,
                                             d.steps[1].second, d.sideband);
    return search_ratio_detunings(c.modes, d.rabi, d.ratio_target);
}

inline std::vector<int> default_truncation(const ExperimentConfig& c, int fallback_single, int fallback_multi) {
    if (!c.truncation.empty()) return c.truncation;
    return std::vector<int>(c.modes.size(), c.modes.size() == 1 ? fallback_single : fallback_multi);
}

inline SystemModel build_system(const ExperimentConfig& c) {
    SystemModel s;
    s.modes = c.modes;
    s.engine = c.engine;
    s.stark = c.stark;
    s.gamma = c.gamma;
    s.residual_shift = c.residual_shift;
    return s;
}

inline json drive_json(const DecouplingDrive& d, const std::vector<ModeSpec>& modes) {
    const StepChi s = step_chi(modes, d);
    json chi = json::array();
    for (double x : s.chi_eff) chi.push_back(x / two_pi);
    return json{{"step1", to_json(d.step1(0.0))},
                {"step2", to_json(d.step2(0.0))},
                {"duration_ratio", s.ratio},
                {"chi_eff_hz", chi}};
}

struct ArtifactBundle {
    json result;
    std::vector<std::string> files;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string stem(const std::filesystem::path& dir, const ExperimentConfig& c, const std::string& what) {
    return (dir / (c.name + "_" + what)).string();
}

inline std::vector<std::string> population_labels(const std::vector<Occupation>& basis) {
    std::vector<std::string> l;
    for (const auto& n : basis) l.push_back(occupation_key(n));
    return l;
}

inline std::vector<int> all_modes(std::size_t m) {
    std::vector<int> v;
    for (std::size_t j = 0; j < m; ++j) v.push_back(static_cast<int>(j));
    return v;
}

inline json run_ramsey(const ExperimentConfig& c, const std::filesystem::path& dir, ArtifactBundle& out) {
    const HilbertSpace space(default_truncation(c, 16, 8), 1);
    RamseySimulator sim(space, build_system(c));
    SpinMotionState state = build_state(c.state, space);
    if (!c.gamma.empty()) state = state.to_density();

    json res;
    const FockDistribution truth = fock_populations(state);
    const auto mask = all_modes(c.modes.size());
    res["truth"] = json{{"populations", to_json(truth)}, {"parity", normalized_parity(truth, mask)}};

    std::vector<RamseyDataset> sets;
    std::vector<svg::Series> series;
    json drives = json::array();
    for (std::size_t k = 0; k < c.drives.size(); ++k) {
        const DecouplingDrive drive = build_drive(c, c.drives[k]);
        const StepChi s = step_chi(c.modes, drive, true);
        const double t_max = c.t_stop > 0.0 ? c.t_stop : c.theta_max / (2.0 * std::abs(s.chi_eff[0]));
        const auto times = linspace(0.0, t_max, c.points);
        const auto p = simulate_trace(sim, state, drive, times);
        RamseyDataset d;
        if (c.shots > 0) {
            d = sample_dataset(times, p, c.shots, splitmix64(c.seed + 0x1000 * (k + 1)));
        } else {
            d.times = times;
            d.p_up = p;
            d.shots.assign(times.size(), 0);
        }
        d.chi_eff_design = s.chi_eff[0];
        if (c.modes.size() >= 2)
            d.ratio_label = std::isfinite(c.drives[k].ratio_label) ? c.drives[k].ratio_label : s.chi_eff[0] / s.chi_eff[1];
        sets.push_back(d);
        json dj = drive_json(drive, c.modes);
        dj["ratio_label"] = std::isfinite(d.ratio_label) ? json(d.ratio_label) : json(nullptr);
        drives.push_back(dj);
        std::ostringstream label;
        label << "data";
        if (std::isfinite(d.ratio_label)) label << " r=" << d.ratio_label;
        series.push_back({label.str(), times, d.p_up, c.shots > 0});
    }
    res["drives"] = drives;

    {
        std::ofstream f(stem(dir, c, "datasets") + ".csv");
        write_dataset_csv(f, sets);
        out.files.push_back(stem(dir, c, "datasets") + ".csv");
    }

    if (c.fit) {
        FitOptions opt;
        opt.n_max = c.fit_n_max;
        opt.mode_count = static_cast<int>(c.modes.size());
        if (c.fit_nonlinear) opt.setting.nonlinear_modes = c.modes;
        const FitResult fit = fit_populations(sets, opt);
        res["fit"] = to_json(fit);
        const auto par = parity_from_populations(fit, mask);
        res["fit"]["parity"] = par.value;
        res["fit"]["parity_sigma"] = par.sigma;
        for (std::size_t k = 0; k < sets.size(); ++k) {
            FitModelParams fp;
            fp.gamma_1 = fit.datasets[k].gamma_1;
            fp.chi_eff_1 = fit.datasets[k].chi_eff_1;
            fp.chi_res = fit.datasets[k].chi_res;
            fp.ratio = fit.datasets[k].ratio;
            fp.populations = fit.populations;
            const auto fine = linspace(sets[k].times.front(), sets[k].times.back(), 4 * c.points);
            series.push_back({"fit " + std::to_string(k + 1), fine, pup_model_full(fp, opt.setting, fine), false});
        }
        std::vector<double> vals;
        for (const auto& n : fit.basis) vals.push_back(fit.populations.probability(n));
        svg::bar_chart(stem(dir, c, "populations"), c.name + ": fitted populations", population_labels(fit.basis), vals,
                       fit.population_sigma, "p_n");
        out.files.push_back(stem(dir, c, "populations") + ".svg");
    }
    svg::line_plot(stem(dir, c, "traces"), c.name + ": Ramsey traces", series, "time (s)", "P_up");
    out.files.push_back(stem(dir, c, "traces") + ".svg");
    return res;
}

inline json run_filter(const ExperimentConfig& c, const std::filesystem::path& dir, ArtifactBundle& out) {
    std::vector<int> dims = default_truncation(c, 24, 10);
    const HilbertSpace space(dims, 1);
    SystemModel sys = build_system(c);
    if (c.drives.empty()) sys.engine = Engine::ideal;
    RamseySimulator sim(space, sys);
    const SpinMotionState state = build_state(c.state, space);
    const int mc = static_cast<int>(c.modes.size());

    FilterPlan plan;
    if (c.protocol == "parity_filter") {
        plan.steps.push_back(parity_filter_plan(mc, c.mask, c.sector));
        plan.target.assign(static_cast<std::size_t>(mc), 0);
        plan.mode_assignment.push_back(c.mask.front());
        plan.bit_index.push_back(0);
    } else {
        std::vector<int> bits = c.bits;
        if (bits.empty())
            for (int n : c.target) bits.push_back(bits_needed(n));
        plan = binary_filter_plan(c.target, bits, c.phase_mode);
    }

    // deterministic projector sequence
    SpinMotionState s = state;
    double pass = 1.0;
    for (const auto& step : plan.steps) {
        const SpinMotionState after = sim.run(s, ideal_spec(step.theta, step.phi));
        const double p_down = 1.0 - probability_up(after, 0);
        pass *= p_down;
        if (p_down < numerical_floor) {
            pass = 0.0;
            break;
        }
        s = condition_on_spin(after, 0, Spin::down);
    }
    const FockDistribution post = fock_populations(s);
    json res;
    res["plan"] = to_json(plan);
    res["ideal"] = json{{"pass_probability", pass}, {"post_populations", to_json(post)}};
    if (pass > 0.0) res["ideal"]["post_parity"] = normalized_parity(post, c.mask);

    double expected = 0.0;
    const FockDistribution prior = fock_populations(state);
    for (const auto& [n, p] : prior.entries()) {
        double q = p;
        for (const auto& step : plan.steps) q *= filter_pass_probability(step, n);
        expected += q;
    }
    res["analytic_pass_probability"] = expected;

    if (c.shots > 0) {
        const EventLedger ledger = single_shot_measure(state, plan, c.shots, c.detection, c.seed, sim, 1);
        res["ledger"] = to_json(ledger);
    }
    write_text(stem(dir, c, "result_plan") + ".json", res["plan"].dump(2) + "\n");
    out.files.push_back(stem(dir, c, "result_plan") + ".json");
    return res;
}

inline json run_single_shot(const ExperimentConfig& c, const std::filesystem::path& dir, ArtifactBundle& out, unsigned threads) {
    const int n_max = c.n_max;
    const int bits = bits_needed(n_max);
    const HilbertSpace space({n_max + 1}, 1);
    SystemModel sys;
    sys.engine = Engine::ideal;
    RamseySimulator sim(space, sys);
    std::vector<std::vector<double>> grid(static_cast<std::size_t>(n_max + 1));
    std::vector<std::vector<double>> sigma(static_cast<std::size_t>(n_max + 1));
    const int shots = c.shots > 0 ? c.shots : 500;
    for (int np = 0; np <= n_max; ++np) {
        const auto prepared = fock_state(space, {np});
        for (int nm = 0; nm <= n_max; ++nm) {
            const auto plan = binary_filter_plan(nm, 0, bits, c.phase_mode, 1);
            const std::uint64_t cell_seed = splitmix64(c.seed ^ (static_cast<std::uint64_t>(np) << 32 | static_cast<std::uint64_t>(nm)));
            const auto ledger = single_shot_measure(prepared, plan, shots, c.detection, cell_seed, sim, threads);
            const auto e = estimate_population(ledger);
            grid[static_cast<std::size_t>(np)].push_back(e.estimate);
            sigma[static_cast<std::size_t>(np)].push_back(e.sigma);
        }
    }
    json res;
    res["n_max"] = n_max;
    res["bits"] = bits;
    res["shots"] = shots;
    res["phase_mode"] = c.phase_mode == PhaseMode::exact ? "exact" : "paper";
    res["grid"] = grid;
    res["sigma"] = sigma;
    res["rows"] = "n_prepare";
    res["cols"] = "n_measure";
    res["closed_form_diagonal"] = closed_form_diagonal(c.detection, bits);
    svg::heat_map(stem(dir, c, "grid"), c.name + ": estimated populations", grid, "n_measure", "n_prepare");
    out.files.push_back(stem(dir, c, "grid") + ".svg");
    return res;
}

inline json run_calibrate(const ExperimentConfig& c, const std::filesystem::path& dir, ArtifactBundle& out) {
    const HilbertSpace space(default_truncation(c, 8, 5), 1);
    const DecouplingDrive drive = build_drive(c, c.drives.front());
    json res;
    res["drive"] = drive_json(drive, c.modes);
    if (c.calibrate_kind == "offset") {
        const auto cal = calibrate_offset(space, build_system(c), drive, c.t_cal);
        res["kind"] = "offset";
        res["residual_hz"] = cal.residual / two_pi;
        res["post_check_p_up"] = cal.post_check_p_up;
        res["contrast"] = cal.contrast;
        std::vector<double> hz;
        for (double x : cal.scan) hz.push_back(x / two_pi);
        svg::line_plot(stem(dir, c, "offset_scan"), c.name + ": vacuum offset scan", {{"P_up", hz, cal.p_up, true}},
                       "offset slope (Hz)", "P_up");
        out.files.push_back(stem(dir, c, "offset_scan") + ".svg");
    } else {
        const auto cal = calibrate_tpi(space, build_system(c), drive, 0);
        res["kind"] = "tpi";
        res["t_pi_s"] = cal.t_pi;
        res["t_design_s"] = cal.t_design;
        res["fringe_frequency_hz"] = cal.angular_frequency / two_pi;
        svg::line_plot(stem(dir, c, "tpi_scan"), c.name + ": |2> probe scan", {{"P_up", cal.times, cal.p_up, true}}, "time (s)",
                       "P_up");
        out.files.push_back(stem(dir, c, "tpi_scan") + ".svg");
    }
    return res;
}

inline json run_linearity(const ExperimentConfig& c, const std::filesystem::path& dir, ArtifactBundle& out) {
    const DecouplingDrive drive = build_drive(c, c.drives.front());
    const StepChi s = step_chi(c.modes, drive, true);
    const std::size_t mc = c.modes.size();
    const HilbertSpace space(c.truncation.empty() ? std::vector<int>(mc, c.n_max + 3) : c.truncation, 1);
    RamseySimulator sim(space, build_system(c));

    // ladder only over modes the drive actually resolves
    double chi_max = 0.0;
    for (double x : s.chi_eff) chi_max = std::max(chi_max, std::abs(x));
    std::vector<int> ladder;
    for (std::size_t j = 0; j < mc; ++j)
        if (std::abs(s.chi_eff[j]) > 0.05 * chi_max) ladder.push_back(static_cast<int>(j));

    std::vector<std::pair<Occupation, double>> points;
    json fits = json::array();
    std::vector<svg::Series> series;
    for (int j : ladder) {
        for (int n = 0; n <= c.n_max; ++n) {
            if (n == 0 && !points.empty()) continue; // one vacuum point
            Occupation occ(mc, 0);
            occ[static_cast<std::size_t>(j)] = n;
            double design = 0.0;
            for (std::size_t k = 0; k < mc; ++k) design += s.chi_eff[k] * occ[k];
            SingleFockFit f;
            if (n == 0) {
                f = fit_single_fock({}, 1, true);
            } else {
                const auto times = linspace(0.0, 2.0 * pi / std::abs(design), c.points);
                RamseyDataset d;
                d.times = times;
                d.p_up = simulate_trace(sim, fock_state(space, occ), drive, times);
                for (auto& p : d.p_up) p = std::clamp(p, 0.0, 1.0);
                f = fit_single_fock(d, design >= 0 ? 1 : -1);
                std::vector<double> th;
                for (double t : times) th.push_back(2.0 * design * t);
                series.push_back({occupation_key(occ), th, d.p_up, false});
            }
            Occupation reduced;
            for (int k : ladder) reduced.push_back(occ[static_cast<std::size_t>(k)]);
            points.emplace_back(reduced, f.chi);
            fits.push_back(json{{"n", occ}, {"chi_hz", f.chi / two_pi}, {"chi_sigma_hz", f.chi_sigma / two_pi},
                                {"design_chi_hz", design / two_pi}, {"vacuum", f.vacuum}});
        }
    }
    const auto reg = linearity_regression(points);
    json res;
    res["drive"] = drive_json(drive, c.modes);
    res["ladder_modes"] = json::array();
    for (int j : ladder) res["ladder_modes"].push_back(j + 1);
    res["fock_fits"] = fits;
    res["regression"] = to_json(reg);
    if (reg.chi_eff.size() == 2) res["regression"]["ratio"] = reg.chi_eff[0] / reg.chi_eff[1];
    svg::line_plot(stem(dir, c, "ladder"), c.name + ": Fock ladder traces", series, "theta_design (rad)", "P_up");
    out.files.push_back(stem(dir, c, "ladder") + ".svg");
    return res;
}

} // namespace detail

/// Deterministic in (config, seed); thread count only changes wall time.
inline ArtifactBundle run_experiment(const ExperimentConfig& c, const std::string& out_dir, unsigned threads = 1) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    ArtifactBundle out;
    WarningCapture capture;
    json body;
    if (c.protocol == "ramsey") body = detail::run_ramsey(c, dir, out);
    else if (c.protocol == "parity_filter" || c.protocol == "binary_filter") body = detail::run_filter(c, dir, out);
    else if (c.protocol == "single_shot") body = detail::run_single_shot(c, dir, out, threads);
    else if (c.protocol == "calibrate") body = detail::run_calibrate(c, dir, out);
    else body = detail::run_linearity(c, dir, out);

    out.warnings = capture.messages();
    out.result = json{{"schema_version", result_schema_version},
                      {"name", c.name},
                      {"protocol", c.protocol},
                      {"seed", c.seed},
                      {"warnings", out.warnings}};
    for (auto it = body.begin(); it != body.end(); ++it) out.result[it.key()] = it.value();
    const std::string path = detail::stem(dir, c, "result") + ".json";
    write_text(path, out.result.dump(2) + "\n");
    out.files.push_back(path);
    return out;
}

} // namespace dispfock
