#pragma once

// CSV datasets and JSON export of states, plans, ledgers and fit results.
// Angles in rad, durations in s; frequencies carry an _hz suffix and are 2*pi-divided.

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dispfock/analysis.hpp"
#include "dispfock/errors.hpp"
#include "dispfock/fock_space.hpp"
#include "dispfock/measurement.hpp"
#include "dispfock/protocol.hpp"

namespace dispfock {

using json = nlohmann::ordered_json;

inline constexpr int result_schema_version = 1;

inline std::string occupation_key(const Occupation& n) {
    std::string s;
    for (std::size_t j = 0; j < n.size(); ++j) s += (j ? "," : "") + std::to_string(n[j]);
    return s;
}

inline Occupation parse_occupation_key(const std::string& key) {
    Occupation n;
    std::stringstream ss(key);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            n.push_back(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw SchemaError("bad occupation key '" + key + "'");
        }
    }
    if (n.empty()) throw SchemaError("empty occupation key");
    return n;
}

inline json to_json(const FockDistribution& d) {
    json j = json::object();
    for (const auto& [n, p] : d.entries()) j[occupation_key(n)] = p;
    return j;
}

// ---------------------------------------------------------------------------
// States

inline json to_json(const HilbertSpace& sp) {
    return json{{"mode_dims", sp.mode_dims()}, {"spin_count", sp.spin_count()}};
}

inline json to_json(const SpinMotionState& s) {
    json j;
    j["space"] = to_json(s.space());
    j["representation"] = s.is_pure() ? "pure" : "density";
    json amps = json::array();
    auto pair = [](cplx z) { return json::array({z.real(), z.imag()}); };
    if (s.is_pure()) {
        for (Eigen::Index i = 0; i < s.amplitudes().size(); ++i) amps.push_back(pair(s.amplitudes()[i]));
    } else {
        const auto& rho = s.density_matrix();
        for (Eigen::Index r = 0; r < rho.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < rho.cols(); ++c) row.push_back(pair(rho(r, c)));
            amps.push_back(row);
        }
    }
    j["amplitudes"] = amps;
    return j;
}

inline SpinMotionState state_from_json(const json& j) {
    try {
        const auto dims = j.at("space").at("mode_dims").get<std::vector<int>>();
        const int spins = j.at("space").at("spin_count").get<int>();
        HilbertSpace sp(dims, spins);
        const auto rep = j.at("representation").get<std::string>();
        const auto& a = j.at("amplitudes");
        const auto dim = static_cast<Eigen::Index>(sp.dimension());
        auto z = [](const json& p) { return cplx(p.at(0).get<double>(), p.at(1).get<double>()); };
        if (rep == "pure") {
            if (static_cast<Eigen::Index>(a.size()) != dim) throw SchemaError("amplitude count does not match the space");
            Vector v(dim);
            for (Eigen::Index i = 0; i < dim; ++i) v[i] = z(a.at(static_cast<std::size_t>(i)));
            return SpinMotionState::pure(sp, v);
        }
        if (rep == "density") {
            if (static_cast<Eigen::Index>(a.size()) != dim) throw SchemaError("density row count does not match the space");
            Operator rho(dim, dim);
            for (Eigen::Index r = 0; r < dim; ++r)
                for (Eigen::Index c = 0; c < dim; ++c)
                    rho(r, c) = z(a.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)));
            return SpinMotionState::density(sp, rho);
        }
        throw SchemaError("representation must be 'pure' or 'density'");
    } catch (const json::exception& e) {
        throw SchemaError(std::string("state JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Protocol objects

inline std::string to_string(Sideband s) { return s == Sideband::blue ? "blue" : "red"; }

inline json to_json(const DriveSegment& s) {
    return json{{"sideband", to_string(s.sideband)},
                {"rabi_hz", s.omega_rabi / two_pi},
                {"carrier_detuning_hz", s.carrier_detuning / two_pi},
                {"duration_s", s.duration}};
}

inline json to_json(const RamseySpec& s) {
    json chi = json::array();
    for (double c : s.chi_eff) chi.push_back(c / two_pi);
    return json{{"theta_rad", s.theta},
                {"phi_rad", s.phi},
                {"phi_off_rad", s.phi_off},
                {"step1", to_json(s.step1)},
                {"step2", to_json(s.step2)},
                {"echo_axis", s.echo == Axis::x ? "x" : (s.echo == Axis::y ? "y" : "z")},
                {"chi_eff_hz", chi},
                {"total_time_s", s.total_time()}};
}

inline json to_json(const FilterPlan& p) {
    json steps = json::array();
    for (const auto& s : p.steps) steps.push_back(json{{"theta_rad", s.theta}, {"phi_rad", s.phi}, {"keep", "down"}});
    return json{{"target", p.target},
                {"phase_mode", p.phase_mode == PhaseMode::exact ? "exact" : "paper"},
                {"mode_assignment", p.mode_assignment},
                {"bit_index", p.bit_index},
                {"steps", steps}};
}

inline json to_json(const EventLedger& l) {
    json steps = json::array();
    for (const auto& c : l.steps) {
        steps.push_back(json{{"a", c.a},
                             {"b", c.b},
                             {"chain", c.chain},
                             {"b_given_chain", c.b_given_chain},
                             {"conditional_frequency",
                              c.chain > 0 ? static_cast<double>(c.b_given_chain) / static_cast<double>(c.chain) : 0.0}});
    }
    json j{{"shots", l.shots}, {"seed", l.seed}, {"steps", steps}};
    const auto e = estimate_population(l);
    j["estimate"] = e.estimate;
    j["uncertainty"] = e.sigma;
    j["degenerate"] = e.degenerate;
    return j;
}

// ---------------------------------------------------------------------------
// Fit results

inline json to_json(const FitResult& f) {
    json pops = json::object(), sig = json::object();
    for (std::size_t k = 0; k < f.basis.size(); ++k) {
        pops[occupation_key(f.basis[k])] = f.populations.probability(f.basis[k]);
        sig[occupation_key(f.basis[k])] = f.population_sigma[k];
    }
    json ds = json::array();
    for (const auto& d : f.datasets) {
        json r = std::isfinite(d.ratio) ? json(d.ratio) : json(nullptr);
        ds.push_back(json{{"ratio", r},
                          {"gamma_1_per_s", d.gamma_1},
                          {"gamma_1_sigma", d.gamma_1_sigma},
                          {"chi_eff_1_hz", d.chi_eff_1 / two_pi},
                          {"chi_eff_1_sigma_hz", d.chi_eff_1_sigma / two_pi},
                          {"chi_res_hz", d.chi_res / two_pi},
                          {"chi_res_sigma_hz", d.chi_res_sigma / two_pi}});
    }
    json groups = json::array();
    for (const auto& g : f.degenerate_groups) {
        json row = json::array();
        for (const auto& n : g) row.push_back(occupation_key(n));
        groups.push_back(row);
    }
    return json{{"schema_version", result_schema_version},
                {"populations", pops},
                {"population_sigma", sig},
                {"population_sum", f.population_sum},
                {"datasets", ds},
                {"residual_norm", f.residual_norm},
                {"converged", f.converged},
                {"message", f.message},
                {"iterations", f.iterations},
                {"starts", f.starts_used},
                {"condition_number", std::isfinite(f.condition_number) ? json(f.condition_number) : json("inf")},
                {"degenerate", f.degenerate},
                {"degenerate_groups", groups},
                {"null_dimension", f.null_dimension},
                {"null_excursion", f.null_excursion}};
}

inline json to_json(const LinearityResult& r) {
    json c = json::array(), s = json::array();
    for (std::size_t j = 0; j < r.chi_eff.size(); ++j) {
        c.push_back(r.chi_eff[j] / two_pi);
        s.push_back(r.chi_eff_sigma[j] / two_pi);
    }
    return json{{"chi_eff_hz", c}, {"chi_eff_sigma_hz", s}, {"rss", r.rss}};
}

// ---------------------------------------------------------------------------
// CSV

/// Columns time_s, p_up, shots, ratio_label.  An empty or "nan" ratio marks a single-mode trace.
inline void write_dataset_csv(std::ostream& os, const std::vector<RamseyDataset>& sets) {
    os << "time_s,p_up,shots,ratio_label\n";
    os << std::setprecision(17);
    for (const auto& d : sets) {
        for (std::size_t i = 0; i < d.times.size(); ++i) {
            os << d.times[i] << ',' << d.p_up[i] << ',' << (d.shots.empty() ? 0 : d.shots[i]) << ',';
            if (std::isfinite(d.ratio_label)) os << d.ratio_label;
            os << '\n';
        }
    }
}

/// Rows are grouped by ratio label in order of first appearance.
inline std::vector<RamseyDataset> read_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw SchemaError("empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "time_s,p_up,shots,ratio_label") throw SchemaError("CSV header must be time_s,p_up,shots,ratio_label");
    std::vector<RamseyDataset> out;
    std::vector<std::string> labels;
    int row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (line.back() == ',') f.emplace_back();
        if (f.size() != 4) throw SchemaError("CSV row " + std::to_string(row) + ": expected 4 fields");
        double t, p, r = std::numeric_limits<double>::quiet_NaN();
        int shots;
        try {
            t = std::stod(f[0]);
            p = std::stod(f[1]);
            shots = std::stoi(f[2]);
            if (!f[3].empty() && f[3] != "nan" && f[3] != "NaN") r = std::stod(f[3]);
        } catch (const std::exception&) {
            throw SchemaError("CSV row " + std::to_string(row) + ": unparsable number");
        }
        std::size_t k = 0;
        while (k < labels.size() && labels[k] != f[3]) ++k;
        if (k == labels.size()) {
            labels.push_back(f[3]);
            out.emplace_back();
            out.back().ratio_label = r;
        }
        out[k].times.push_back(t);
        out[k].p_up.push_back(p);
        out[k].shots.push_back(shots);
    }
    for (auto& d : out) {
        try {
            d.validate();
        } catch (const BoundsError& e) {
            throw SchemaError(std::string("CSV dataset: ") + e.what());
        }
    }
    if (out.empty()) throw SchemaError("CSV has no data rows");
    return out;
}

inline std::vector<RamseyDataset> read_dataset_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("cannot open " + path);
    return read_dataset_csv(static_cast<std::istream&>(f));
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

} // namespace dispfock
