// dispfock: batch runner for Ramsey, filter, single-shot, calibration and linearity workflows.
//
// Exit codes: 0 ok, 1 other failure, 2 usage, 3 schema, 4 scheduling, 5 fit, 6 calibration.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dispfock/dispfock.hpp"

using namespace dispfock;

namespace {

enum Exit { ok = 0, other = 1, usage = 2, schema = 3, scheduling = 4, fit = 5, calibration = 6 };

struct Global {
    std::uint64_t seed = 1;
    bool seed_set = false;
    unsigned threads = 0;
    std::string out_dir = "out";
    std::string format = "json";
};

json trap_json(int modes) {
    json m = json::array({json{{"frequency_hz", 0.94e6}, {"eta", 0.10}}});
    if (modes > 1) m.push_back(json{{"frequency_hz", 1.27e6}, {"eta", 0.087}});
    return json{{"modes", m}};
}

json step(int mode, double khz) { return json{{"mode", mode}, {"sideband_detuning_hz", khz * 1e3}}; }

/// Blue-sideband detunings (step 1, step 2) for the four experimental settings.
json table_drive(const std::string& setting) {
    json steps;
    if (setting == "single") steps = json::array({step(1, 110.0), step(1, -110.0)});
    else if (setting == "1:2") steps = json::array({step(2, 49.0), step(1, -142.5)});
    else if (setting == "1:1") steps = json::array({step(2, 50.0), step(1, -62.5)});
    else if (setting == "2:1") steps = json::array({step(2, 93.0), step(1, -50.0)});
    else throw SchemaError("--setting must be one of single, 1:2, 1:1, 2:1");
    return json{{"rabi_hz", 1e5}, {"sideband", "blue"}, {"steps", steps}};
}

void flatten(const json& j, const std::string& prefix, std::ostream& os) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), os);
    } else if (j.is_array()) {
        for (std::size_t k = 0; k < j.size(); ++k) flatten(j[k], prefix + "[" + std::to_string(k) + "]", os);
    } else {
        os << prefix << ',' << (j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
    }
}

void emit(const json& result, const Global& g) {
    if (g.format == "csv") {
        std::cout << "key,value\n";
        flatten(result, "", std::cout);
    } else {
        std::cout << result.dump(2) << '\n';
    }
}

unsigned thread_count(const Global& g) {
    if (g.threads > 0) return g.threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

void run_config_json(json cfg, const Global& g) {
    if (g.seed_set) cfg["seed"] = g.seed;
    const ExperimentConfig c = parse_config(cfg);
    const auto bundle = run_experiment(c, g.out_dir, thread_count(g));
    for (const auto& w : bundle.warnings) std::cerr << "warning: " << w << '\n';
    emit(bundle.result, g);
}

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("cannot open config " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("config is not valid JSON: ") + e.what());
    }
}

std::vector<double> parse_list(const std::string& s, const std::string& flag) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            v.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "not a comma-separated number list: " + s);
        }
    }
    return v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dispersive Fock-state measurement simulator"};
    app.require_subcommand(1);
    Global g;
    app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { g.seed = s; g.seed_set = true; }, "RNG seed");
    app.add_option("--threads", g.threads, "worker threads (default: all cores)");
    app.add_option("--out-dir", g.out_dir, "directory for datasets, results and plots");
    app.add_option("--format", g.format, "stdout rendering of the result")->check(CLI::IsMember({"csv", "json"}));

    // run
    std::string config_path;
    auto* run = app.add_subcommand("run", "run a config file");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();

    // simulate
    std::string sim_config;
    auto* simulate = app.add_subcommand("simulate", "simulate Ramsey traces from a config without fitting");
    simulate->add_option("--config", sim_config, "experiment config with protocol 'ramsey'")->required();

    // fit
    std::string csv_path;
    std::string ratios, chi_design;
    int fit_nmax = 4;
    int fit_modes = 0;
    bool fit_nonlinear = false;
    auto* fitc = app.add_subcommand("fit", "fit populations to CSV traces");
    fitc->add_option("--csv", csv_path, "dataset CSV (time_s,p_up,shots,ratio_label)");
    fitc->add_option("--ratios", ratios, "fixed ratios chi_eff,1/chi_eff,2 per dataset, in file order");
    fitc->add_option("--chi-design-hz", chi_design, "design chi_eff,1 per dataset (Hz); default: coarse scan");
    fitc->add_option("--n-max", fit_nmax, "largest fitted occupation per mode");
    fitc->add_option("--modes", fit_modes, "1 or 2 (default: 2 when ratios are present)");
    fitc->add_flag("--nonlinear", fit_nonlinear, "use Laguerre number factors with the default trap");

    // filter
    double alpha = 1.5;
    std::string sector = "even";
    int filter_shots = 10000;
    std::string filter_config;
    auto* filter = app.add_subcommand("filter", "parity filtering statistics on a coherent state");
    filter->add_option("--config", filter_config, "config with protocol parity_filter or binary_filter");
    filter->add_option("--alpha", alpha, "coherent amplitude");
    filter->add_option("--sector", sector)->check(CLI::IsMember({"even", "odd"}));
    filter->add_option("--shots", filter_shots);

    // single-shot
    int ss_nmax = 5, ss_shots = 500;
    double lambda_b = 0.0, lambda_d = 0.0;
    std::string phase_mode = "exact";
    auto* single = app.add_subcommand("single-shot", "n_prepare x n_measure grid of single-shot estimates");
    single->add_option("--n-max", ss_nmax);
    single->add_option("--shots", ss_shots);
    single->add_option("--lambda-bright", lambda_b, "mean bright counts (default: perfect detection)");
    single->add_option("--lambda-dark", lambda_d, "mean dark counts");
    single->add_option("--phase-mode", phase_mode)->check(CLI::IsMember({"exact", "paper"}));

    // calibrate
    std::string cal_kind;
    double residual_hz = 0.0;
    std::string cal_engine = "effective";
    auto* cal = app.add_subcommand("calibrate", "offset or t_pi calibration against the simulator");
    cal->add_option("kind", cal_kind, "offset | tpi")->required()->check(CLI::IsMember({"offset", "tpi"}));
    cal->add_option("--residual-hz", residual_hz, "injected residual spin shift");
    cal->add_option("--engine", cal_engine)->check(
        CLI::IsMember({"ideal", "effective", "effective_nonlinear", "jc_linear", "jc_nonlinear"}));

    // linearity
    std::string setting = "single";
    std::string lin_engine = "jc_nonlinear";
    int lin_nmax = 6;
    auto* lin = app.add_subcommand("linearity", "Fock-ladder chi regression for one detuning setting");
    lin->add_option("--setting", setting)->check(CLI::IsMember({"single", "1:2", "1:1", "2:1"}));
    lin->add_option("--engine", lin_engine)->check(
        CLI::IsMember({"ideal", "effective", "effective_nonlinear", "jc_linear", "jc_nonlinear"}));
    lin->add_option("--n-max", lin_nmax);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? Exit::ok : Exit::usage;
    }

    try {
        if (run->parsed()) {
            run_config_json(read_json_file(config_path), g);
        } else if (simulate->parsed()) {
            json cfg = read_json_file(sim_config);
            if (cfg.value("protocol", "") != "ramsey") throw SchemaError("/protocol: simulate needs a ramsey config");
            cfg["fit"] = json{{"enabled", false}};
            run_config_json(cfg, g);
        } else if (fitc->parsed()) {
            if (csv_path.empty()) csv_path = std::string("data/ecs_even_alpha1_synthetic.csv");
            auto sets = read_dataset_csv(csv_path);
            if (!ratios.empty()) {
                const auto r = parse_list(ratios, "--ratios");
                if (r.size() != sets.size())
                    throw SchemaError("--ratios: " + std::to_string(r.size()) + " ratios for " + std::to_string(sets.size()) + " datasets");
                for (std::size_t k = 0; k < r.size(); ++k) sets[k].ratio_label = r[k];
            }
            if (!chi_design.empty()) {
                const auto c = parse_list(chi_design, "--chi-design-hz");
                if (c.size() != sets.size()) throw SchemaError("--chi-design-hz: one value per dataset is required");
                for (std::size_t k = 0; k < c.size(); ++k) sets[k].chi_eff_design = two_pi * c[k];
            }
            FitOptions opt;
            opt.n_max = fit_nmax;
            opt.mode_count = fit_modes > 0 ? fit_modes : (std::isfinite(sets.front().ratio_label) ? 2 : 1);
            if (fit_nonlinear) {
                std::vector<ModeSpec> m{{two_pi * 0.94e6, 0.10}, {two_pi * 1.27e6, 0.087}};
                m.resize(static_cast<std::size_t>(opt.mode_count));
                opt.setting.nonlinear_modes = m;
            }
            WarningCapture capture;
            const auto res = fit_populations(sets, opt);
            json out = to_json(res);
            std::vector<int> mask;
            for (int j = 0; j < opt.mode_count; ++j) mask.push_back(j);
            const auto par = parity_from_populations(res, mask);
            out["parity"] = par.value;
            out["parity_sigma"] = par.sigma;
            out["warnings"] = capture.messages();
            std::filesystem::create_directories(g.out_dir);
            write_text((std::filesystem::path(g.out_dir) / "fit_result.json").string(), out.dump(2) + "\n");
            std::vector<std::string> labels;
            std::vector<double> vals;
            for (const auto& n : res.basis) {
                labels.push_back(occupation_key(n));
                vals.push_back(res.populations.probability(n));
            }
            svg::bar_chart((std::filesystem::path(g.out_dir) / "fit_populations").string(), "fitted populations", labels, vals,
                           res.population_sigma, "p_n");
            emit(out, g);
        } else if (filter->parsed()) {
            json cfg;
            if (!filter_config.empty()) {
                cfg = read_json_file(filter_config);
            } else {
                cfg = json{{"schema_version", 1},
                           {"name", "filter"},
                           {"protocol", "parity_filter"},
                           {"trap", trap_json(1)},
                           {"engine", "ideal"},
                           {"state", json{{"kind", "coherent"}, {"alpha", json::array({alpha})}}},
                           {"shots", filter_shots},
                           {"filter", json{{"sector", sector}, {"modes", json::array({1})}}},
                           {"detection", "perfect"}};
            }
            run_config_json(cfg, g);
        } else if (single->parsed()) {
            json det = "perfect";
            if (lambda_b > 0.0) det = json{{"lambda_bright", lambda_b}, {"lambda_dark", lambda_d}};
            json cfg{{"schema_version", 1},
                     {"name", "single_shot"},
                     {"protocol", "single_shot"},
                     {"trap", trap_json(1)},
                     {"engine", "ideal"},
                     {"shots", ss_shots},
                     {"single_shot", json{{"n_max", ss_nmax}, {"phase_mode", phase_mode}}},
                     {"detection", det}};
            run_config_json(cfg, g);
        } else if (cal->parsed()) {
            json cfg{{"schema_version", 1},
                     {"name", "calibrate_" + cal_kind},
                     {"protocol", "calibrate"},
                     {"trap", trap_json(1)},
                     {"drives", json::array({table_drive("single")})},
                     {"engine", cal_engine},
                     {"residual_shift_hz", residual_hz},
                     {"calibrate", json{{"kind", cal_kind}}}};
            run_config_json(cfg, g);
        } else if (lin->parsed()) {
            json cfg{{"schema_version", 1},
                     {"name", "linearity_" + std::string(setting == "single" ? "single" : setting.substr(0, 1) + "to" + setting.substr(2))},
                     {"protocol", "linearity"},
                     {"trap", trap_json(setting == "single" ? 1 : 2)},
                     {"drives", json::array({table_drive(setting)})},
                     {"engine", lin_engine},
                     {"linearity", json{{"n_max", lin_nmax}}}};
            run_config_json(cfg, g);
        }
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return Exit::schema;
    } catch (const SchedulingError& e) {
        std::cerr << "scheduling error: " << e.what() << '\n';
        return Exit::scheduling;
    } catch (const FitError& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return Exit::fit;
    } catch (const CalibrationError& e) {
        std::cerr << "calibration error: " << e.what() << '\n';
        return Exit::calibration;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return Exit::usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Exit::other;
    }
    return Exit::ok;
}
