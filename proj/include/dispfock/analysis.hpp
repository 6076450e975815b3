#pragma once

// Ramsey signal models and population estimation from P_up(t) traces.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dispfock/dynamics.hpp"
#include "dispfock/errors.hpp"
#include "dispfock/fock_space.hpp"
#include "dispfock/least_squares.hpp"
#include "dispfock/protocol.hpp"
#include "dispfock/rng.hpp"

namespace dispfock {

// ---------------------------------------------------------------------------
// Closed-form models

/// P_up = 1/2 - 1/2 sum_n p_n cos(theta.n).
inline double pup_model_linear(const FockDistribution& pops, const std::vector<double>& theta) {
    double s = 0.0;
    for (const auto& [n, p] : pops.entries()) {
        double tn = 0.0;
        for (std::size_t j = 0; j < n.size() && j < theta.size(); ++j) tn += theta[j] * n[j];
        s += p * std::cos(tn);
    }
    return 0.5 - 0.5 * s;
}

struct FitModelParams {
    double gamma_1 = 0.0;   // 1/s
    double chi_eff_1 = 0.0; // rad/s
    double chi_res = 0.0;   // rad/s
    double ratio = std::numeric_limits<double>::quiet_NaN(); // chi_eff,1 / chi_eff,2; NaN: single mode
    FockDistribution populations;
};

/// What the model needs to know about how a trace was taken.
struct FitSetting {
    /// Present: number factors S_j(n) with Laguerre corrections; absent: S_j = 2 n_j + 1.
    std::optional<std::vector<ModeSpec>> nonlinear_modes;
};

namespace detail {

struct ModelTerm {
    double gamma_coeff = 0.0; // gamma_n / gamma_1
    double phase_coeff = 0.0; // (Phi_tot - phi_off) / (chi_1 t)
};

inline ModelTerm model_term(const Occupation& n, double ratio, const FitSetting& setting) {
    const bool two = n.size() >= 2 && std::isfinite(ratio);
    ModelTerm m;
    std::vector<double> s(n.size());
    for (std::size_t j = 0; j < n.size(); ++j) {
        if (setting.nonlinear_modes) {
            const auto& modes = *setting.nonlinear_modes;
            s[j] = dispersive_number_factor(static_cast<int>(j), n, modes);
        } else {
            s[j] = 2.0 * n[j] + 1.0;
        }
    }
    m.gamma_coeff = 2.0 * n[0] + 1.0;
    m.phase_coeff = s[0] - 1.0;
    if (two) {
        m.gamma_coeff += (2.0 * n[1] + 1.0) / ratio;
        m.phase_coeff += (s[1] - 1.0) / ratio;
    }
    return m;
}

} // namespace detail

/// Sum_n (p_n/2)(1 - e^{-gamma_n t} cos(Phi_tot,n + Phi_res - phi_off)).
inline std::vector<double> pup_model_full(const FitModelParams& params, const FitSetting& setting,
                                          const std::vector<double>& times) {
    std::vector<double> out(times.size(), 0.0);
    for (const auto& [n, p] : params.populations.entries()) {
        const auto term = detail::model_term(n, params.ratio, setting);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double t = times[i];
            const double psi = t * params.chi_eff_1 * term.phase_coeff + 2.0 * params.chi_res * t;
            out[i] += 0.5 * p * (1.0 - std::exp(-params.gamma_1 * term.gamma_coeff * t) * std::cos(psi));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Datasets

struct RamseyDataset {
    std::vector<double> times;
    std::vector<double> p_up;
    std::vector<int> shots;
    double ratio_label = std::numeric_limits<double>::quiet_NaN();
    double chi_eff_design = 0.0; // rad/s; 0 = unknown
    std::optional<RamseySpec> spec;

    void validate() const {
        if (times.size() != p_up.size()) throw BoundsError("times and p_up differ in length");
        if (!shots.empty() && shots.size() != times.size()) throw BoundsError("shots and times differ in length");
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (i > 0 && !(times[i] > times[i - 1])) throw BoundsError("times must be strictly increasing");
            if (!(p_up[i] >= 0.0 && p_up[i] <= 1.0)) throw BoundsError("p_up must lie in [0, 1]");
        }
    }
};

/// Binomial projection noise: each point becomes k/shots with k ~ Binomial(shots, p).
inline RamseyDataset sample_dataset(const std::vector<double>& times, const std::vector<double>& p_true, int shots,
                                    std::uint64_t seed, double ratio_label = std::numeric_limits<double>::quiet_NaN()) {
    if (times.size() != p_true.size()) throw BoundsError("times and probabilities differ in length");
    if (shots < 1) throw BoundsError("shots must be >= 1");
    RamseyDataset d;
    d.times = times;
    d.ratio_label = ratio_label;
    for (std::size_t i = 0; i < times.size(); ++i) {
        RandomStream rng(seed, i);
        const double p = std::clamp(p_true[i], 0.0, 1.0);
        d.p_up.push_back(static_cast<double>(sample_binomial(rng, shots, p)) / shots);
        d.shots.push_back(shots);
    }
    return d;
}

/// P_up(t) of V(theta(t), phi) from the simulator with t1/t2 rescaled for every point.
inline std::vector<double> simulate_trace(const RamseySimulator& sim, const SpinMotionState& state,
                                          const DecouplingDrive& drive, const std::vector<double>& times,
                                          double phi = 0.0) {
    std::vector<double> p;
    for (double t : times) p.push_back(sim.p_up(state, schedule_for_time(sim.system().modes, drive, t, phi)));
    return p;
}

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1.0));
    return v;
}

// ---------------------------------------------------------------------------
// Single-Fock fit

struct SingleFockFit {
    double gamma = 0.0, chi = 0.0, phase = 0.0;
    double gamma_sigma = 0.0, chi_sigma = 0.0, phase_sigma = 0.0;
    bool vacuum = false;
    double rss = 0.0;
};

/// f_up = (1 - e^{-gamma t} cos(2 chi t + phase)) / 2.  The sign of chi is fixed by chi_sign (+1 or -1):
/// (chi, phase) and (-chi, -phase) give the same trace.
inline SingleFockFit fit_single_fock(const RamseyDataset& trace, int chi_sign = 1, bool vacuum = false) {
    SingleFockFit out;
    if (vacuum) {
        // the vacuum is calibrated flat; by convention chi = 0 with no sinusoidal fit
        out.vacuum = true;
        return out;
    }
    trace.validate();
    const std::size_t n = trace.times.size();
    if (n < 5) throw DegenerateFitError("at least 5 points are needed for a single-Fock fit");
    const double span = trace.times.back() - trace.times.front();
    double dt_min = span;
    for (std::size_t i = 1; i < n; ++i) dt_min = std::min(dt_min, trace.times[i] - trace.times[i - 1]);
    double mean = 0.0;
    for (double y : trace.p_up) mean += y;
    mean /= static_cast<double>(n);

    // periodogram over angular frequencies from half a fringe per span up to Nyquist
    const double w_lo = std::numbers::pi / span, w_hi = std::numbers::pi / dt_min;
    double best_w = 0.0, best_pow = -1.0;
    const int grid = 4000;
    for (int k = 0; k < grid; ++k) {
        const double w = w_lo + (w_hi - w_lo) * k / (grid - 1.0);
        double c = 0.0, s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            c += (trace.p_up[i] - mean) * std::cos(w * trace.times[i]);
            s += (trace.p_up[i] - mean) * std::sin(w * trace.times[i]);
        }
        const double pw = c * c + s * s;
        if (pw > best_pow) {
            best_pow = pw;
            best_w = w;
        }
    }
    const double amp_est = 2.0 * std::sqrt(best_pow) / static_cast<double>(n);
    if (amp_est < 0.02) throw DegenerateFitError("trace does not oscillate; no single-Fock fringe to fit");

    const double sgn = chi_sign >= 0 ? 1.0 : -1.0;
    LsqProblem prob;
    prob.lower = Eigen::Vector3d(0.0, sgn > 0 ? 0.0 : -INFINITY, -INFINITY);
    prob.upper = Eigen::Vector3d(INFINITY, sgn > 0 ? INFINITY : 0.0, INFINITY);
    prob.evaluate = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
        r.resize(static_cast<Eigen::Index>(n));
        if (J) J->resize(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = trace.times[i];
            const double e = std::exp(-x[0] * t);
            const double arg = 2.0 * x[1] * t + x[2];
            const auto k = static_cast<Eigen::Index>(i);
            r[k] = 0.5 * (1.0 - e * std::cos(arg)) - trace.p_up[i];
            if (J) {
                (*J)(k, 0) = 0.5 * t * e * std::cos(arg);
                (*J)(k, 1) = t * e * std::sin(arg);
                (*J)(k, 2) = 0.5 * e * std::sin(arg);
            }
        }
    };
    LsqResult best;
    for (double g0 : {0.0, 0.3 / span, 1.0 / span, 3.0 / span}) {
        for (double ph0 : {0.0, 0.5 * std::numbers::pi, std::numbers::pi, -0.5 * std::numbers::pi}) {
            Eigen::VectorXd x0(3);
            x0 << g0, sgn * 0.5 * best_w, ph0;
            auto r = least_squares_bounded(prob, x0);
            if (r.cost < best.cost) best = r;
        }
    }
    out.gamma = best.x[0];
    out.chi = best.x[1];
    out.phase = std::remainder(best.x[2], 2.0 * std::numbers::pi);
    out.rss = 2.0 * best.cost;
    const auto cov = covariance_from_jacobian(best.jacobian, out.rss, static_cast<Eigen::Index>(n) - 3);
    out.gamma_sigma = std::sqrt(std::max(cov.matrix(0, 0), 0.0));
    out.chi_sigma = std::sqrt(std::max(cov.matrix(1, 1), 0.0));
    out.phase_sigma = std::sqrt(std::max(cov.matrix(2, 2), 0.0));
    return out;
}

// ---------------------------------------------------------------------------
// Joint population fit

struct FitOptions {
    int n_max = 6;
    int mode_count = 1;
    int starts = 8;
    double gamma_init = 10.0;             // 1/s
    double condition_threshold = 1e8;
    // weight of the residual row w (sum p - 1); the vacuum column only enters through decay, so without it
    // p_0 is nearly free.  0 disables.
    double normalization_weight = 1.0;
    FitSetting setting;
    LsqOptions lsq;
};

struct DatasetParams {
    double gamma_1 = 0.0, chi_eff_1 = 0.0, chi_res = 0.0;
    double gamma_1_sigma = 0.0, chi_eff_1_sigma = 0.0, chi_res_sigma = 0.0;
    double ratio = std::numeric_limits<double>::quiet_NaN();
};

struct FitResult {
    std::vector<Occupation> basis;            // population ordering
    FockDistribution populations;
    std::vector<double> population_sigma;
    Eigen::MatrixXd population_covariance;
    std::vector<DatasetParams> datasets;
    double population_sum = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string message;
    double condition_number = 0.0;            // Lamb-Dicke-limit population design
    bool degenerate = false;
    std::vector<std::vector<Occupation>> degenerate_groups;
    int null_dimension = 0;       // singular values below max / condition_threshold
    // Largest population change reachable along any one null vector without leaving p >= 0.
    // Zero means positivity pins the fit even though the design is singular.
    double null_excursion = 0.0;
    int starts_used = 0;
};

namespace detail {

inline std::vector<Occupation> population_basis(int n_max, int mode_count) {
    HilbertSpace grid(std::vector<int>(static_cast<std::size_t>(mode_count), n_max + 1), 1);
    std::vector<Occupation> b;
    for (std::size_t m = 0; m < grid.motional_dimension(); ++m) b.push_back(grid.occupation(m));
    return b;
}

struct JointModel {
    const std::vector<RamseyDataset>* data;
    std::vector<Occupation> basis;
    std::vector<std::vector<ModelTerm>> terms; // [dataset][n]
    std::size_t n_pop = 0;
    std::size_t n_rows = 0; // data rows
    double norm_weight = 0.0;

    Eigen::Index pidx(std::size_t d, int k) const { return static_cast<Eigen::Index>(n_pop + 3 * d + static_cast<std::size_t>(k)); }

    void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J, bool populations_only) const {
        const auto total_rows = static_cast<Eigen::Index>(n_rows + (norm_weight > 0.0 ? 1 : 0));
        r.setZero(total_rows);
        if (J) J->setZero(total_rows, x.size());
        Eigen::Index row = 0;
        for (std::size_t d = 0; d < data->size(); ++d) {
            const auto& ds = (*data)[d];
            const double g1 = x[pidx(d, 0)], c1 = x[pidx(d, 1)], cr = x[pidx(d, 2)];
            for (std::size_t i = 0; i < ds.times.size(); ++i, ++row) {
                const double t = ds.times[i];
                double val = 0.0, dg = 0.0, dc = 0.0, dr = 0.0;
                for (std::size_t k = 0; k < n_pop; ++k) {
                    const auto& term = terms[d][k];
                    const double e = std::exp(-g1 * term.gamma_coeff * t);
                    const double psi = t * c1 * term.phase_coeff + 2.0 * cr * t;
                    const double cs = std::cos(psi), sn = std::sin(psi);
                    const double basis_val = 0.5 * (1.0 - e * cs);
                    const double p = x[static_cast<Eigen::Index>(k)];
                    val += p * basis_val;
                    if (J) {
                        (*J)(row, static_cast<Eigen::Index>(k)) = basis_val;
                        if (!populations_only) {
                            dg += 0.5 * p * term.gamma_coeff * t * e * cs;
                            dc += 0.5 * p * e * sn * t * term.phase_coeff;
                            dr += 0.5 * p * e * sn * 2.0 * t;
                        }
                    }
                }
                r[row] = val - ds.p_up[i];
                if (J && !populations_only) {
                    (*J)(row, pidx(d, 0)) = dg;
                    (*J)(row, pidx(d, 1)) = dc;
                    (*J)(row, pidx(d, 2)) = dr;
                }
            }
        }
        if (norm_weight > 0.0) {
            double sum = 0.0;
            for (std::size_t k = 0; k < n_pop; ++k) {
                sum += x[static_cast<Eigen::Index>(k)];
                if (J) (*J)(row, static_cast<Eigen::Index>(k)) = norm_weight;
            }
            r[row] = norm_weight * (sum - 1.0);
        }
    }
};

} // namespace detail

/// Joint bounded least squares: populations shared across datasets; (gamma_1, chi_eff,1, chi_res) per dataset.
inline FitResult fit_populations(const std::vector<RamseyDataset>& datasets, const FitOptions& opt = {}) {
    if (datasets.empty()) throw FitError("at least one dataset is required");
    if (opt.mode_count < 1 || opt.mode_count > 2) throw FitError("population fits support one or two modes");
    if (opt.n_max < 0) throw FitError("n_max must be >= 0");
    for (const auto& d : datasets) {
        d.validate();
        if (opt.mode_count == 2 && !(std::isfinite(d.ratio_label) && d.ratio_label > 0.0))
            throw FitError("two-mode datasets need a positive ratio label");
    }

    detail::JointModel model;
    model.data = &datasets;
    model.basis = detail::population_basis(opt.n_max, opt.mode_count);
    model.n_pop = model.basis.size();
    model.norm_weight = std::max(0.0, opt.normalization_weight);
    for (const auto& d : datasets) {
        model.n_rows += d.times.size();
        std::vector<detail::ModelTerm> t;
        const double r = opt.mode_count == 2 ? d.ratio_label : std::numeric_limits<double>::quiet_NaN();
        for (const auto& n : model.basis) t.push_back(detail::model_term(n, r, opt.setting));
        model.terms.push_back(std::move(t));
    }
    const auto n_par = static_cast<Eigen::Index>(model.n_pop + 3 * datasets.size());
    if (static_cast<Eigen::Index>(model.n_rows) <= n_par) throw FitError("fewer data points than free parameters");

    Eigen::VectorXd lo = Eigen::VectorXd::Constant(n_par, -INFINITY), hi = Eigen::VectorXd::Constant(n_par, INFINITY);
    for (std::size_t k = 0; k < model.n_pop; ++k) lo[static_cast<Eigen::Index>(k)] = 0.0;

    // chi_eff,1 design per dataset; an unknown design is located by a coarse scan with populations solved linearly
    std::vector<double> design(datasets.size());
    auto pop_stage = [&](Eigen::VectorXd x) {
        LsqProblem p;
        p.lower = lo;
        p.upper = hi;
        for (Eigen::Index i = static_cast<Eigen::Index>(model.n_pop); i < n_par; ++i) p.lower[i] = p.upper[i] = x[i];
        p.evaluate = [&](const Eigen::VectorXd& y, Eigen::VectorXd& r, Eigen::MatrixXd* J) { model.evaluate(y, r, J, true); };
        return least_squares_bounded(p, std::move(x), opt.lsq);
    };
    auto initial = [&](const std::vector<double>& chis) {
        Eigen::VectorXd x(n_par);
        const double q = 0.5; // thermal profile p_n ~ q^{|n|}
        for (std::size_t k = 0; k < model.n_pop; ++k) {
            int s = 0;
            for (int v : model.basis[k]) s += v;
            x[static_cast<Eigen::Index>(k)] = (1.0 - q) * std::pow(q, s);
        }
        for (std::size_t d = 0; d < datasets.size(); ++d) {
            x[model.pidx(d, 0)] = opt.gamma_init;
            x[model.pidx(d, 1)] = chis[d];
            x[model.pidx(d, 2)] = 0.0;
        }
        return x;
    };
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        design[d] = datasets[d].chi_eff_design;
        if (design[d] != 0.0) continue;
        double best_cost = INFINITY, best_chi = 0.0;
        for (int k = 0; k < 120; ++k) {
            const double chi = two_pi * 10.0 * std::pow(10.0, 2.5 * k / 119.0);
            for (double sgn : {1.0, -1.0}) {
                std::vector<double> chis = design;
                for (auto& c : chis)
                    if (c == 0.0) c = sgn * chi;
                const auto r = pop_stage(initial(chis));
                if (r.cost < best_cost) {
                    best_cost = r.cost;
                    best_chi = sgn * chi;
                }
            }
        }
        design[d] = best_chi;
    }
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        if (design[d] > 0.0) lo[model.pidx(d, 1)] = 0.0;
        else hi[model.pidx(d, 1)] = 0.0;
        lo[model.pidx(d, 0)] = 0.0;
    }

    LsqProblem full;
    full.lower = lo;
    full.upper = hi;
    full.evaluate = [&](const Eigen::VectorXd& y, Eigen::VectorXd& r, Eigen::MatrixXd* J) { model.evaluate(y, r, J, false); };

    LsqResult best;
    const int starts = std::max(1, opt.starts);
    for (int s = 0; s < starts; ++s) {
        const double scale = starts == 1 ? 1.0 : 0.8 + 0.4 * s / (starts - 1.0);
        std::vector<double> chis;
        for (double c : design) chis.push_back(c * scale);
        auto stage1 = pop_stage(initial(chis));
        auto r = least_squares_bounded(full, stage1.x, opt.lsq);
        if (r.cost < best.cost) best = r;
    }

    FitResult out;
    out.starts_used = starts;
    out.basis = model.basis;
    out.converged = best.converged;
    out.message = best.message;
    out.iterations = best.iterations;
    out.residual_norm = std::sqrt(2.0 * best.cost);
    if (!best.converged) {
        std::ostringstream os;
        os << "population fit did not converge after " << starts << " starts; best residual norm " << out.residual_norm;
        throw FitError(os.str());
    }

    const double rss = 2.0 * best.cost;
    const auto cov = covariance_from_jacobian(best.jacobian, rss, static_cast<Eigen::Index>(model.n_rows) - n_par);
    std::map<Occupation, double> pops;
    for (std::size_t k = 0; k < model.n_pop; ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        pops[model.basis[k]] = std::max(best.x[i], 0.0);
        out.population_sigma.push_back(std::sqrt(std::max(cov.matrix(i, i), 0.0)));
        out.population_sum += std::max(best.x[i], 0.0);
    }
    out.populations = FockDistribution(std::move(pops));
    const auto np = static_cast<Eigen::Index>(model.n_pop);
    out.population_covariance = cov.matrix.topLeftCorner(np, np);
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        DatasetParams p;
        p.gamma_1 = best.x[model.pidx(d, 0)];
        p.chi_eff_1 = best.x[model.pidx(d, 1)];
        p.chi_res = best.x[model.pidx(d, 2)];
        p.gamma_1_sigma = std::sqrt(std::max(cov.matrix(model.pidx(d, 0), model.pidx(d, 0)), 0.0));
        p.chi_eff_1_sigma = std::sqrt(std::max(cov.matrix(model.pidx(d, 1), model.pidx(d, 1)), 0.0));
        p.chi_res_sigma = std::sqrt(std::max(cov.matrix(model.pidx(d, 2), model.pidx(d, 2)), 0.0));
        p.ratio = opt.mode_count == 2 ? datasets[d].ratio_label : std::numeric_limits<double>::quiet_NaN();
        out.datasets.push_back(p);
    }

    // Identifiability: Lamb-Dicke-limit population design at the fitted rates, and exact coincidences.
    {
        FitOptions ld = opt;
        ld.setting.nonlinear_modes.reset();
        std::vector<std::vector<detail::ModelTerm>> ld_terms;
        for (const auto& d : datasets) {
            std::vector<detail::ModelTerm> t;
            const double r = opt.mode_count == 2 ? d.ratio_label : std::numeric_limits<double>::quiet_NaN();
            for (const auto& n : model.basis) t.push_back(detail::model_term(n, r, ld.setting));
            ld_terms.push_back(std::move(t));
        }
        Eigen::MatrixXd A(static_cast<Eigen::Index>(model.n_rows), np);
        Eigen::Index row = 0;
        for (std::size_t d = 0; d < datasets.size(); ++d) {
            for (double t : datasets[d].times) {
                for (std::size_t k = 0; k < model.n_pop; ++k) {
                    const auto& term = ld_terms[d][k];
                    A(row, static_cast<Eigen::Index>(k)) =
                        0.5 * (1.0 - std::exp(-out.datasets[d].gamma_1 * term.gamma_coeff * t) *
                                         std::cos(t * out.datasets[d].chi_eff_1 * term.phase_coeff + 2.0 * out.datasets[d].chi_res * t));
                }
                ++row;
            }
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
        const auto sv = svd.singularValues();
        out.condition_number = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
        for (Eigen::Index k = 0; k < sv.size(); ++k) {
            if (sv[k] * opt.condition_threshold > sv[0]) continue;
            ++out.null_dimension;
            const Eigen::VectorXd v = svd.matrixV().col(k);
            for (double dir : {1.0, -1.0}) {
                double eps = INFINITY;
                for (Eigen::Index i = 0; i < np; ++i)
                    if (dir * v[i] < -1e-9) eps = std::min(eps, std::max(best.x[i], 0.0) / std::abs(v[i]));
                if (std::isfinite(eps)) out.null_excursion = std::max(out.null_excursion, eps * v.cwiseAbs().maxCoeff());
            }
        }

        std::map<std::vector<long long>, std::vector<Occupation>> groups;
        for (std::size_t k = 0; k < model.n_pop; ++k) {
            std::vector<long long> key;
            for (std::size_t d = 0; d < datasets.size(); ++d) {
                key.push_back(std::llround(ld_terms[d][k].phase_coeff * 1e9));
                key.push_back(std::llround(ld_terms[d][k].gamma_coeff * 1e9));
            }
            groups[key].push_back(model.basis[k]);
        }
        for (auto& [key, g] : groups)
            if (g.size() > 1) out.degenerate_groups.push_back(g);
        out.degenerate = out.condition_number > opt.condition_threshold || !out.degenerate_groups.empty();
        if (out.degenerate) {
            std::ostringstream os;
            os << "population design is near-singular (condition " << out.condition_number << ", null dimension "
               << out.null_dimension << ", " << out.degenerate_groups.size()
               << " coincident groups); populations can move by up to " << out.null_excursion
               << " along null directions without changing the model";
            warn(os.str());
        }
    }
    return out;
}

struct ParityEstimate {
    double value = 0.0;
    double sigma = 0.0;
};

/// Normalized parity sum_n p_n (-1)^{mask.n} / sum_n p_n with linear error propagation.
inline ParityEstimate parity_from_populations(const FitResult& fit, const std::vector<int>& mode_mask) {
    const double total = fit.population_sum;
    if (!(total > 0.0)) throw FitError("population sum must be positive for a parity estimate");
    ParityEstimate e;
    e.value = std::clamp(parity_expectation(fit.populations, mode_mask) / total, -1.0, 1.0);
    Eigen::VectorXd g(static_cast<Eigen::Index>(fit.basis.size()));
    for (std::size_t k = 0; k < fit.basis.size(); ++k) {
        int s = 0;
        for (int j : mode_mask) s += fit.basis[k][static_cast<std::size_t>(j)];
        const double sign = (s % 2 == 0) ? 1.0 : -1.0;
        g[static_cast<Eigen::Index>(k)] = (sign - e.value) / total;
    }
    if (fit.population_covariance.rows() == g.size()) e.sigma = std::sqrt(std::max(0.0, g.dot(fit.population_covariance * g)));
    return e;
}

/// Parity of a distribution normalized by its own total.
inline double normalized_parity(const FockDistribution& d, const std::vector<int>& mask) {
    return parity_expectation(d, mask) / d.total();
}

// ---------------------------------------------------------------------------
// Linearity regression

struct LinearityResult {
    std::vector<double> chi_eff;       // per mode, rad/s (slope of chi vs n_j; 2 chi = sum 2 chi_eff,j n_j)
    std::vector<double> chi_eff_sigma;
    double rss = 0.0;
};

inline LinearityResult linearity_regression(const std::vector<std::pair<Occupation, double>>& points) {
    if (points.empty()) throw RegressionError("no points to regress");
    const std::size_t m = points.front().first.size();
    const auto rows = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd A(rows, static_cast<Eigen::Index>(m));
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& [n, chi] = points[static_cast<std::size_t>(i)];
        if (n.size() != m) throw RegressionError("occupation vectors differ in length");
        for (std::size_t j = 0; j < m; ++j) A(i, static_cast<Eigen::Index>(j)) = n[j];
        y[i] = chi;
    }
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<int> distinct;
        for (const auto& p : points) distinct.push_back(p.first[j]);
        std::sort(distinct.begin(), distinct.end());
        if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2)
            throw RegressionError("mode " + std::to_string(j + 1) + " needs at least two distinct occupations");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < static_cast<Eigen::Index>(m)) throw RegressionError("rank-deficient occupation design");
    const Eigen::VectorXd beta = qr.solve(y);
    LinearityResult out;
    out.rss = (A * beta - y).squaredNorm();
    const double s2 = rows > static_cast<Eigen::Index>(m) ? out.rss / static_cast<double>(rows - static_cast<Eigen::Index>(m)) : 0.0;
    const Eigen::MatrixXd cov = (A.transpose() * A).inverse() * s2;
    for (std::size_t j = 0; j < m; ++j) {
        out.chi_eff.push_back(beta[static_cast<Eigen::Index>(j)]);
        out.chi_eff_sigma.push_back(std::sqrt(std::max(cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)), 0.0)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Multi-ion spin strings

/// Spin-string label with ion 1 first; 'u' = up, 'd' = down.
inline std::string spin_string_label(std::size_t s, int n_ions) {
    std::string out;
    for (int i = 0; i < n_ions; ++i) out += ((s >> (n_ions - 1 - i)) & 1U) ? 'u' : 'd';
    return out;
}

/// P_s = sum_n p_n prod_i Gamma_i^{(s_i)}(n) with Gamma^up = sin^2((theta_i.n - phi_i)/2).
inline std::map<std::string, double> spin_string_probabilities(const FockDistribution& pops,
                                                                const std::vector<std::vector<double>>& theta_per_ion,
                                                                const std::vector<double>& phi_per_ion = {}) {
    const int n_ions = static_cast<int>(theta_per_ion.size());
    if (n_ions < 1 || n_ions > 20) throw BoundsError("ion count must lie in [1, 20]");
    std::vector<double> prob(std::size_t{1} << n_ions, 0.0);
    for (const auto& [n, p] : pops.entries()) {
        std::vector<double> up(static_cast<std::size_t>(n_ions));
        for (int i = 0; i < n_ions; ++i) {
            double tn = 0.0;
            const auto& th = theta_per_ion[static_cast<std::size_t>(i)];
            for (std::size_t j = 0; j < n.size() && j < th.size(); ++j) tn += th[j] * n[j];
            const double phi = phi_per_ion.empty() ? 0.0 : phi_per_ion.at(static_cast<std::size_t>(i));
            const double s = std::sin(0.5 * (tn - phi));
            up[static_cast<std::size_t>(i)] = s * s;
        }
        for (std::size_t s = 0; s < prob.size(); ++s) {
            double w = p;
            for (int i = 0; i < n_ions; ++i) {
                const bool is_up = (s >> (n_ions - 1 - i)) & 1U;
                w *= is_up ? up[static_cast<std::size_t>(i)] : 1.0 - up[static_cast<std::size_t>(i)];
            }
            prob[s] += w;
        }
    }
    // normalize by the population total so the strings sum to one for truncated inputs too
    const double total = pops.total();
    std::map<std::string, double> out;
    for (std::size_t s = 0; s < prob.size(); ++s) out[spin_string_label(s, n_ions)] = total > 0.0 ? prob[s] / total : 0.0;
    return out;
}

inline std::map<std::string, double> spin_string_probabilities(const FockDistribution& pops, const MultiIonModel& model,
                                                                double t) {
    std::vector<std::vector<double>> th;
    for (std::size_t i = 0; i < model.chi_matrix.size(); ++i) th.push_back(model.theta(static_cast<int>(i), t));
    return spin_string_probabilities(pops, th);
}

} // namespace dispfock
