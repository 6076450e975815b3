#pragma once

// Selective-decoupling Ramsey sequences, filter plans and simulator-driven calibrations.
//
// The sequence V(theta, phi) is
//
//   R_{pi + phi + phi_off}(pi/2) . U2 . R_y(pi) . U1 . R_x(pi/2)
//
// The extra pi on the last pulse makes P_up = (1 - cos(theta.n - phi)) / 2, so the
// motional vacuum stays dark and the filter keeps the down outcome.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <tuple>
#include <vector>

#include "dispfock/dynamics.hpp"
#include "dispfock/errors.hpp"
#include "dispfock/fock_space.hpp"
#include "dispfock/spin_ops.hpp"

namespace dispfock {

using std::numbers::pi;

inline double wrap_phase(double phi) {
    double r = std::fmod(phi, 2.0 * pi);
    if (r < 0.0) r += 2.0 * pi;
    if (r >= 2.0 * pi) r = 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Scheduling

/// Two-step drive: sideband and carrier detuning of each step.  Durations are filled in by scheduling.
struct DecouplingDrive {
    double omega_rabi = 0.0;
    Sideband sideband1 = Sideband::blue;
    double carrier_detuning1 = 0.0;
    Sideband sideband2 = Sideband::blue;
    double carrier_detuning2 = 0.0;

    DriveSegment step1(double duration) const { return {sideband1, omega_rabi, carrier_detuning1, duration}; }
    DriveSegment step2(double duration) const { return {sideband2, omega_rabi, carrier_detuning2, duration}; }

    /// t1 / t2 required to cancel the carrier Stark phase.
    double duration_ratio() const {
        if (carrier_detuning2 == 0.0 || carrier_detuning1 == 0.0)
            throw ResonanceError("carrier detuning is zero in a decoupling step");
        return carrier_detuning1 / carrier_detuning2;
    }
};

/// Drive specified by sideband detunings relative to chosen modes (zero-based indices), as in a detuning table.
inline DecouplingDrive drive_from_sideband_detunings(const std::vector<ModeSpec>& modes, double omega_rabi,
                                                     int mode1, double delta1, int mode2, double delta2,
                                                     Sideband sideband = Sideband::blue) {
    validate_modes(modes);
    if (mode1 < 0 || mode2 < 0 || mode1 >= static_cast<int>(modes.size()) || mode2 >= static_cast<int>(modes.size()))
        throw BoundsError("reference mode index out of range");
    DecouplingDrive d;
    d.omega_rabi = omega_rabi;
    d.sideband1 = d.sideband2 = sideband;
    d.carrier_detuning1 = carrier_detuning_for(modes[static_cast<std::size_t>(mode1)], sideband, delta1);
    d.carrier_detuning2 = carrier_detuning_for(modes[static_cast<std::size_t>(mode2)], sideband, delta2);
    return d;
}

struct RamseySpec {
    std::vector<double> theta;   // achieved SDR angles, rad
    double phi = 0.0;            // analysis phase
    double phi_off = 0.0;        // sum theta / 2
    DriveSegment step1;
    DriveSegment step2;
    Axis echo = Axis::y;
    std::vector<double> chi_eff; // per mode, rad/s

    double total_time() const { return step1.duration + step2.duration; }
};

/// Per-step chi_j and the step-averaged chi_eff,j with theta_j = 2 chi_eff,j (t1 + t2).
struct StepChi {
    std::vector<double> chi1, chi2, chi_eff;
    double ratio = 0.0; // t1 / t2
};

inline StepChi step_chi(const std::vector<ModeSpec>& modes, const DecouplingDrive& drive, bool emit_warnings = false) {
    StepChi s;
    s.ratio = drive.duration_ratio();
    if (!(s.ratio > 0.0)) {
        std::ostringstream os;
        os << "carrier detunings of opposite sign give t1/t2 = " << s.ratio << " < 0; no decoupling schedule exists";
        throw SchedulingError(os.str());
    }
    s.chi1 = dispersive_coefficients(modes, drive.step1(0.0), 0, emit_warnings).chi;
    s.chi2 = dispersive_coefficients(modes, drive.step2(0.0), 0, emit_warnings).chi;
    for (std::size_t j = 0; j < modes.size(); ++j)
        s.chi_eff.push_back((-s.chi1[j] * s.ratio + s.chi2[j]) / (1.0 + s.ratio));
    return s;
}

/// Spec for a given total interaction time; the durations satisfy t1/t2 = Delta1/Delta2 exactly.
inline RamseySpec schedule_for_time(const std::vector<ModeSpec>& modes, const DecouplingDrive& drive, double total_time,
                                    double phi = 0.0) {
    if (!(total_time >= 0.0)) throw SchedulingError("total time must be >= 0");
    const StepChi s = step_chi(modes, drive);
    RamseySpec spec;
    const double t2 = total_time / (1.0 + s.ratio);
    const double t1 = total_time - t2;
    spec.step1 = drive.step1(t1);
    spec.step2 = drive.step2(t2);
    spec.chi_eff = s.chi_eff;
    double sum = 0.0;
    for (double c : s.chi_eff) {
        spec.theta.push_back(2.0 * c * total_time);
        sum += spec.theta.back();
    }
    spec.phi = phi;
    spec.phi_off = 0.5 * sum;
    return spec;
}

/// Schedules the total time so that 2 chi_eff,j t = theta_j for every targeted mode.
/// NaN targets mark modes whose angle is left free.
inline RamseySpec schedule_selective_decoupling(const std::vector<ModeSpec>& modes, const std::vector<double>& targets,
                                                const DecouplingDrive& drive, double phi = 0.0,
                                                double rel_tol = 1e-6) {
    if (targets.size() != modes.size()) throw SchedulingError("one target angle per mode is required");
    const StepChi s = step_chi(modes, drive, true);
    std::optional<std::size_t> ref;
    for (std::size_t j = 0; j < targets.size(); ++j)
        if (!std::isnan(targets[j]) && targets[j] != 0.0) {
            ref = j;
            break;
        }
    if (!ref) throw SchedulingError("at least one nonzero target angle is required");
    const std::size_t r = *ref;
    if (s.chi_eff[r] == 0.0) throw SchedulingError("effective dispersive shift of the reference mode vanishes");
    // theta_r(t) = 2 chi_eff,r t is linear, so the root of theta_r(t) - target is closed form
    const double t = targets[r] / (2.0 * s.chi_eff[r]);
    if (!(t > 0.0)) {
        std::ostringstream os;
        os << "target angle " << targets[r] << " for mode " << r + 1 << " has the wrong sign for chi_eff = "
           << s.chi_eff[r] / two_pi << " Hz x 2pi";
        throw SchedulingError(os.str());
    }
    for (std::size_t j = 0; j < targets.size(); ++j) {
        if (j == r || std::isnan(targets[j])) continue;
        const double achieved = 2.0 * s.chi_eff[j] * t;
        if (std::abs(achieved - targets[j]) > rel_tol * std::max(1.0, std::abs(targets[j]))) {
            std::ostringstream os;
            os << "requested theta_" << j + 1 << "/theta_" << r + 1 << " = "
               << (targets[j] / targets[r]) << " is unreachable; these detunings give chi_eff ratio "
               << s.chi_eff[j] / s.chi_eff[r];
            throw SchedulingError(os.str());
        }
    }
    return schedule_for_time(modes, drive, t, phi);
}

/// Carrier Stark phase left by a spec: (Omega^2/4)(t1/Delta1 - t2/Delta2) for equal Rabi frequencies.
inline double stark_phase(const RamseySpec& spec) {
    return -stark_shift(spec.step1) * spec.step1.duration + stark_shift(spec.step2) * spec.step2.duration;
}

/// Two-mode detuning search: step 1 above the higher blue sideband, step 2 below the lower one.  Picks the
/// pair reaching chi_eff,1/chi_eff,2 = ratio that maximizes min |delta| with validity ratios <= 0.2.
inline DecouplingDrive search_ratio_detunings(const std::vector<ModeSpec>& modes, double omega_rabi, double ratio,
                                              int grid = 400) {
    validate_modes(modes);
    if (modes.size() != 2) throw SchedulingError("detuning search is defined for two modes");
    if (!(ratio > 0.0)) throw SchedulingError("target ratio must be positive");
    const int hi = modes[1].omega >= modes[0].omega ? 1 : 0;
    const int lo = 1 - hi;
    const double eta_max = std::max(modes[0].eta, modes[1].eta);
    const double d_min = eta_max * omega_rabi / validity_warning_ratio;
    const double span = std::abs(modes[1].omega - modes[0].omega);
    const double d_max = std::max(4.0 * span, 20.0 * d_min);

    auto ratio_of = [&](double d1, double d2) {
        DecouplingDrive d = drive_from_sideband_detunings(modes, omega_rabi, hi, d1, lo, -d2);
        const StepChi s = step_chi(modes, d);
        return s.chi_eff[0] / s.chi_eff[1];
    };
    auto validity_ok = [&](const DecouplingDrive& d) {
        for (const auto& seg : {d.step1(0.0), d.step2(0.0)}) {
            const auto c = dispersive_coefficients(modes, seg, 0, false);
            for (double v : c.validity)
                if (v > validity_warning_ratio + 1e-12) return false;
        }
        return true;
    };

    std::optional<DecouplingDrive> best;
    double best_score = -1.0;
    double achieved_lo = std::numeric_limits<double>::infinity(), achieved_hi = 0.0;
    for (int a = 0; a < grid; ++a) {
        const double d1 = d_min + (d_max - d_min) * a / (grid - 1.0);
        double prev_d2 = d_min;
        double prev_f = ratio_of(d1, prev_d2) - ratio;
        for (int b = 1; b < grid; ++b) {
            // keep Delta2 = omega_lo - d2 positive
            const double d2 = d_min + (modes[static_cast<std::size_t>(lo)].omega * 0.999 - d_min) * b / (grid - 1.0);
            const double f = ratio_of(d1, d2) - ratio;
            achieved_lo = std::min(achieved_lo, f + ratio);
            achieved_hi = std::max(achieved_hi, f + ratio);
            if ((prev_f <= 0.0) != (f <= 0.0)) {
                double x0 = prev_d2, x1 = d2, f0 = prev_f;
                for (int it = 0; it < 80; ++it) {
                    const double xm = 0.5 * (x0 + x1);
                    const double fm = ratio_of(d1, xm) - ratio;
                    if ((fm <= 0.0) == (f0 <= 0.0)) {
                        x0 = xm;
                        f0 = fm;
                    } else {
                        x1 = xm;
                    }
                }
                const double root = 0.5 * (x0 + x1);
                DecouplingDrive d = drive_from_sideband_detunings(modes, omega_rabi, hi, d1, lo, -root);
                if (validity_ok(d)) {
                    // strongest weaker mode: the shortest sequences for a given angle
                    const StepChi sc = step_chi(modes, d);
                    const double score = std::min(std::abs(sc.chi_eff[0]), std::abs(sc.chi_eff[1]));
                    if (score > best_score) {
                        best_score = score;
                        best = d;
                    }
                }
            }
            prev_d2 = d2;
            prev_f = f;
        }
    }
    if (!best) {
        std::ostringstream os;
        os << "ratio " << ratio << " is unreachable within the validity bound; achievable range ["
           << achieved_lo << ", " << achieved_hi << "]";
        throw SchedulingError(os.str());
    }
    return *best;
}

// ---------------------------------------------------------------------------
// Sequence simulation

enum class Engine {
    ideal,               // exact SDR with the spec's theta; no Stark, no dispersive corrections
    effective,           // diagonal dispersive model, linear in n
    effective_nonlinear, // diagonal model with Laguerre factors
    jc_linear,           // full sideband propagator, Lamb-Dicke linear couplings
    jc_nonlinear         // full sideband propagator, dressed couplings
};

struct SystemModel {
    std::vector<ModeSpec> modes;
    Engine engine = Engine::effective;
    bool stark = true;
    std::vector<double> gamma;      // per-mode decay rates, 1/s (empty: none)
    double residual_shift = 0.0;    // rad/s spin frequency offset that survives the echo
    double offset_correction = 0.0; // rad/s slope added to the final pulse phase
    int ion = 0;
};

/// Runs V(theta, phi) on a state; the result is the state just before the measurement.
/// Caches one propagator per distinct segment drive; a simulator instance is not thread-safe.
class RamseySimulator {
public:
    RamseySimulator(HilbertSpace space, SystemModel system) : space_(std::move(space)), sys_(std::move(system)) {
        if (sys_.engine != Engine::ideal && static_cast<int>(sys_.modes.size()) != space_.mode_count())
            throw BoundsError("system mode list does not match the space");
    }

    const HilbertSpace& space() const { return space_; }
    const SystemModel& system() const { return sys_; }
    SystemModel& system() { return sys_; }

    SpinMotionState run(const SpinMotionState& input, const RamseySpec& spec) const {
        if (!(input.space() == space_)) throw RepresentationError("state lives on a different space");
        SpinMotionState s = input;
        const bool decay = !sys_.gamma.empty();
        if (decay && s.is_pure()) s = s.to_density();
        const int ion = sys_.ion;

        s = apply_spin_unitary(s, rotation(Axis::x, pi / 2.0), ion);
        s = segment(s, spec, 1, 0.0);
        s = apply_spin_unitary(s, rotation(spec.echo, pi), ion);
        s = segment(s, spec, 2, spec.step1.duration);
        const double psi = pi + spec.phi + spec.phi_off + sys_.offset_correction * spec.total_time();
        s = apply_spin_unitary(s, rotation_phi(psi, pi / 2.0), ion);
        return s;
    }

    double p_up(const SpinMotionState& input, const RamseySpec& spec) const {
        return probability_up(run(input, spec), sys_.ion);
    }

private:
    SpinMotionState segment(const SpinMotionState& in, const RamseySpec& spec, int step, double t0) const {
        const DriveSegment& seg = step == 1 ? spec.step1 : spec.step2;
        const double tau = seg.duration;
        SpinMotionState s = in;
        switch (sys_.engine) {
        case Engine::ideal:
            if (step == 2) {
                // all of theta.(2n+1)/4 on the second arm reproduces U2 R_y U1 of the physical sequence
                Vector d = sdr_diagonal(space_, spec.theta, sys_.ion);
                double off = 0.0;
                for (double th : spec.theta) off += th;
                d = d.cwiseProduct(spin_phase(0.25 * off));
                s = apply_diagonal(s, d);
            }
            break;
        case Engine::effective:
        case Engine::effective_nonlinear:
            if (tau > 0.0)
                s = evolve_diagonal(s, effective_energies(space_, sys_.modes, seg, sys_.engine == Engine::effective_nonlinear,
                                                          sys_.stark, sys_.ion),
                                    tau);
            break;
        case Engine::jc_linear:
        case Engine::jc_nonlinear:
            if (tau > 0.0) s = propagator(seg).apply(s, tau, t0);
            break;
        }
        if (sys_.residual_shift != 0.0 && tau > 0.0) {
            const double a = (step == 1 ? -0.5 : 0.5) * sys_.residual_shift;
            s = apply_diagonal(s, spin_phase(a * tau));
        }
        if (!sys_.gamma.empty() && tau > 0.0) s = dephase(s, sys_.gamma, tau);
        return s;
    }

    /// exp(-i a sigma_z) on the driven ion.
    Vector spin_phase(double a) const {
        const std::size_t md = space_.motional_dimension();
        Vector d(static_cast<Eigen::Index>(space_.dimension()));
        for (std::size_t i = 0; i < space_.dimension(); ++i)
            d[static_cast<Eigen::Index>(i)] = std::polar(1.0, space_.spin_up(i / md, sys_.ion) ? -a : a);
        return d;
    }

    const Propagator& propagator(const DriveSegment& seg) const {
        const auto key = std::make_tuple(static_cast<int>(seg.sideband), seg.omega_rabi, seg.carrier_detuning);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        FrameHamiltonian h = sys_.engine == Engine::jc_nonlinear
                                 ? nonlinear_jc_hamiltonian(space_, sys_.modes, seg, sys_.stark, sys_.ion)
                                 : jc_frame_hamiltonian(space_, sys_.modes, seg, sys_.stark, sys_.ion);
        return cache_.emplace(key, Propagator(space_, std::move(h))).first->second;
    }

    HilbertSpace space_;
    SystemModel sys_;
    mutable std::map<std::tuple<int, double, double>, Propagator> cache_;
};

/// Spec for an ideal V(theta, phi) with no physical drive behind it.
inline RamseySpec ideal_spec(const std::vector<double>& theta, double phi) {
    RamseySpec s;
    s.theta = theta;
    s.phi = phi;
    double sum = 0.0;
    for (double t : theta) sum += t;
    s.phi_off = 0.5 * sum;
    return s;
}

// ---------------------------------------------------------------------------
// Filters

enum class Parity { even, odd };
enum class PhaseMode { exact, paper };

struct FilterStep {
    std::vector<double> theta;
    double phi = 0.0;
    Spin keep = Spin::down;
};

struct FilterPlan {
    std::vector<FilterStep> steps;
    Occupation target;               // n*
    std::vector<int> mode_assignment; // mode addressed by each step
    std::vector<int> bit_index;       // digit l of each step
    PhaseMode phase_mode = PhaseMode::exact;
};

/// theta = pi on every masked mode; phi = 0 keeps even, pi keeps odd.
inline FilterStep parity_filter_plan(int mode_count, const std::vector<int>& mode_mask, Parity sector) {
    FilterStep s;
    s.theta.assign(static_cast<std::size_t>(mode_count), 0.0);
    for (int j : mode_mask) {
        if (j < 0 || j >= mode_count) throw BoundsError("parity mask mode out of range");
        s.theta[static_cast<std::size_t>(j)] = pi;
    }
    s.phi = sector == Parity::even ? 0.0 : pi;
    return s;
}

inline double binary_phase(int target, int bit, PhaseMode mode) {
    if (mode == PhaseMode::paper) return ((target >> bit) & 1) ? pi : 0.0;
    return wrap_phase(pi * static_cast<double>(target) / static_cast<double>(1 << bit));
}

inline void check_bits(int target, int bits) {
    if (bits < 1 || bits > 30) throw BitsError("bit count must lie in [1, 30]");
    if (target < 0 || target >= (1 << bits)) {
        std::ostringstream os;
        os << "target " << target << " does not fit in " << bits << " bits";
        throw BitsError(os.str());
    }
}

/// Digits l = 0..bits-1 of target on one mode: theta_l = pi / 2^l on that mode.
inline FilterPlan binary_filter_plan(int target, int mode, int bits, PhaseMode phase_mode = PhaseMode::exact,
                                     int mode_count = 1) {
    check_bits(target, bits);
    if (mode < 0 || mode >= mode_count) throw BoundsError("filter mode out of range");
    FilterPlan plan;
    plan.target.assign(static_cast<std::size_t>(mode_count), 0);
    plan.target[static_cast<std::size_t>(mode)] = target;
    plan.phase_mode = phase_mode;
    for (int l = 0; l < bits; ++l) {
        FilterStep s;
        s.theta.assign(static_cast<std::size_t>(mode_count), 0.0);
        s.theta[static_cast<std::size_t>(mode)] = pi / static_cast<double>(1 << l);
        s.phi = binary_phase(target, l, phase_mode);
        plan.steps.push_back(std::move(s));
        plan.mode_assignment.push_back(mode);
        plan.bit_index.push_back(l);
    }
    return plan;
}

inline int bits_needed(int n) { return std::max(1, static_cast<int>(std::bit_width(static_cast<unsigned>(n)))); }

/// Sequential multimode plan: each mode's digits in turn (mode-major, ascending l).
inline FilterPlan binary_filter_plan(const Occupation& targets, const std::vector<int>& bits,
                                     PhaseMode phase_mode = PhaseMode::exact) {
    if (bits.size() != targets.size()) throw BitsError("one bit count per mode is required");
    FilterPlan plan;
    plan.target = targets;
    plan.phase_mode = phase_mode;
    const int m = static_cast<int>(targets.size());
    for (int j = 0; j < m; ++j) {
        auto single = binary_filter_plan(targets[static_cast<std::size_t>(j)], j, bits[static_cast<std::size_t>(j)],
                                         phase_mode, m);
        for (std::size_t k = 0; k < single.steps.size(); ++k) {
            plan.steps.push_back(single.steps[k]);
            plan.mode_assignment.push_back(j);
            plan.bit_index.push_back(single.bit_index[k]);
        }
    }
    return plan;
}

/// One (mode, digit) condition executed by one ion within a round.
struct FilterCondition {
    int ion = 0;
    int mode = 0;
    int bit = 0;
    double theta = 0.0; // on the addressed mode
    double phi = 0.0;
};

struct FilterRound {
    std::vector<FilterCondition> conditions;
};

/// Packs all (mode, digit) conditions into rounds of at most n_ions; ceil(sum m_j / N) rounds.
inline std::vector<FilterRound> parallel_filter_plan(const Occupation& targets, int n_ions,
                                                     PhaseMode phase_mode = PhaseMode::exact,
                                                     std::vector<int> bits = {}) {
    if (n_ions < 1) throw BoundsError("at least one ion is required");
    if (bits.empty())
        for (int n : targets) bits.push_back(bits_needed(n));
    if (bits.size() != targets.size()) throw BitsError("one bit count per mode is required");
    std::vector<FilterCondition> all;
    for (std::size_t j = 0; j < targets.size(); ++j) {
        check_bits(targets[j], bits[j]);
        for (int l = 0; l < bits[j]; ++l)
            all.push_back({0, static_cast<int>(j), l, pi / static_cast<double>(1 << l), binary_phase(targets[j], l, phase_mode)});
    }
    std::vector<FilterRound> rounds;
    for (std::size_t k = 0; k < all.size(); ++k) {
        if (k % static_cast<std::size_t>(n_ions) == 0) rounds.emplace_back();
        all[k].ion = static_cast<int>(k % static_cast<std::size_t>(n_ions));
        rounds.back().conditions.push_back(all[k]);
    }
    return rounds;
}

/// Probability that a Fock component n passes one exact-dynamics filter step (spin found down).
inline double filter_pass_probability(const FilterStep& step, const Occupation& n) {
    double tn = 0.0;
    for (std::size_t j = 0; j < n.size(); ++j) tn += step.theta[j] * n[j];
    const double p_up = 0.5 * (1.0 - std::cos(tn - step.phi));
    return step.keep == Spin::down ? 1.0 - p_up : p_up;
}

// ---------------------------------------------------------------------------
// Calibration

namespace detail {

/// Linear fit y = a + b cos(w x) + c sin(w x).  Returns (a, b, c, rss).
inline std::tuple<double, double, double, double> fit_sinusoid_fixed(const std::vector<double>& x,
                                                                    const std::vector<double>& y, double w) {
    Eigen::MatrixXd A(static_cast<Eigen::Index>(x.size()), 3);
    Eigen::VectorXd b(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        A(r, 0) = 1.0;
        A(r, 1) = std::cos(w * x[i]);
        A(r, 2) = std::sin(w * x[i]);
        b[r] = y[i];
    }
    Eigen::Vector3d p = A.colPivHouseholderQr().solve(b);
    const double rss = (A * p - b).squaredNorm();
    return {p[0], p[1], p[2], rss};
}

/// Minimum of a + b cos(w x) + c sin(w x) closest to x_ref.  Returns (x_dip, amplitude).
inline std::pair<double, double> sinusoid_dip(double b, double c, double w, double x_ref) {
    const double amp = std::hypot(b, c);
    // a + amp cos(w x - phase); minimum where w x - phase = pi (mod 2 pi)
    const double phase = std::atan2(c, b);
    const double period = 2.0 * pi / std::abs(w);
    double x0 = (phase + pi) / w;
    const double k = std::round((x_ref - x0) / period);
    return {x0 + k * period, amp};
}

} // namespace detail

struct OffsetCalibration {
    double residual = 0.0;            // rad/s
    double post_check_p_up = 0.0;     // vacuum P_up at t_cal with the correction applied
    std::vector<double> scan;         // offset slopes, rad/s
    std::vector<double> p_up;
    double contrast = 0.0;
};

/// Scans the final-pulse phase slope around the nominal phi_off on the motional vacuum and returns the dip center.
inline OffsetCalibration calibrate_offset(const HilbertSpace& space, const SystemModel& system,
                                          const DecouplingDrive& drive, double t_cal = 4e-3,
                                          double half_range = 0.0, int points = 41) {
    if (!(t_cal > 0.0)) throw CalibrationError("t_cal must be positive");
    if (points < 5) throw CalibrationError("at least 5 scan points are required");
    if (half_range <= 0.0) half_range = 0.4 * 2.0 * pi / t_cal;
    const RamseySpec spec = schedule_for_time(system.modes, drive, t_cal);
    SystemModel sys = system;
    RamseySimulator sim(space, sys);
    const SpinMotionState vac = fock_state(space, Occupation(static_cast<std::size_t>(space.mode_count()), 0));

    OffsetCalibration out;
    for (int k = 0; k < points; ++k) {
        const double d = -half_range + 2.0 * half_range * k / (points - 1.0);
        sim.system().offset_correction = system.offset_correction + d;
        out.scan.push_back(d);
        out.p_up.push_back(sim.p_up(vac, spec));
    }
    const auto [a, b, c, rss] = detail::fit_sinusoid_fixed(out.scan, out.p_up, t_cal);
    (void)a;
    (void)rss;
    const auto [dip, amp] = detail::sinusoid_dip(b, c, t_cal, 0.0);
    out.contrast = 2.0 * amp;
    if (amp < 0.05 || std::abs(dip) > half_range) {
        std::ostringstream os;
        os << "no offset dip within +-" << half_range / two_pi << " Hz (contrast " << 2.0 * amp << ")";
        throw CalibrationError(os.str());
    }
    out.residual = dip;
    sim.system().offset_correction = system.offset_correction + dip;
    out.post_check_p_up = sim.p_up(vac, spec);
    if (!(out.post_check_p_up < 0.1)) {
        std::ostringstream os;
        os << "post-calibration vacuum P_up = " << out.post_check_p_up << " is not below 0.1";
        throw CalibrationError(os.str());
    }
    return out;
}

struct TpiCalibration {
    double t_pi = 0.0;      // s
    double t_design = 0.0;  // pi / (2 |chi_eff,1|)
    double angular_frequency = 0.0; // fitted fringe frequency of the |2> probe, rad/s
    std::vector<double> times;
    std::vector<double> p_up;
};

/// Locates the first dip of the |2, 0, ...> probe under V(theta(t), 0) for mode `mode`.
inline TpiCalibration calibrate_tpi(const HilbertSpace& space, const SystemModel& system, const DecouplingDrive& drive,
                                    int mode = 0, int points = 41) {
    if (mode < 0 || mode >= space.mode_count()) throw CalibrationError("probe mode out of range");
    if (space.mode_dims()[static_cast<std::size_t>(mode)] < 3) throw CalibrationError("probe |2> does not fit in the truncation");
    const StepChi sc = step_chi(system.modes, drive);
    const double chi = sc.chi_eff[static_cast<std::size_t>(mode)];
    if (chi == 0.0) throw CalibrationError("effective dispersive shift of the probe mode vanishes");
    TpiCalibration out;
    out.t_design = pi / (2.0 * std::abs(chi));
    Occupation probe(static_cast<std::size_t>(space.mode_count()), 0);
    probe[static_cast<std::size_t>(mode)] = 2;
    const SpinMotionState psi = fock_state(space, probe);
    RamseySimulator sim(space, system);
    for (int k = 0; k < points; ++k) {
        const double t = out.t_design * (0.5 + static_cast<double>(k) / (points - 1.0));
        out.times.push_back(t);
        out.p_up.push_back(sim.p_up(psi, schedule_for_time(system.modes, drive, t)));
    }
    // frequency search around the design value 4 |chi|, then golden-section refinement
    const double w0 = 4.0 * std::abs(chi);
    auto rss_at = [&](double w) { return std::get<3>(detail::fit_sinusoid_fixed(out.times, out.p_up, w)); };
    double best_w = w0, best = rss_at(w0);
    for (int k = -60; k <= 60; ++k) {
        const double w = w0 * (1.0 + 0.005 * k);
        const double r = rss_at(w);
        if (r < best) {
            best = r;
            best_w = w;
        }
    }
    double lo = best_w * 0.995, hi = best_w * 1.005;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 60; ++it) {
        const double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
        if (rss_at(m1) < rss_at(m2))
            hi = m2;
        else
            lo = m1;
    }
    out.angular_frequency = 0.5 * (lo + hi);
    const auto [a, b, c, rss] = detail::fit_sinusoid_fixed(out.times, out.p_up, out.angular_frequency);
    (void)a;
    (void)rss;
    const auto [dip, amp] = detail::sinusoid_dip(b, c, out.angular_frequency, out.t_design);
    if (amp < 0.05 || dip < out.times.front() || dip > out.times.back()) {
        std::ostringstream os;
        os << "no t_pi dip within [" << out.times.front() << ", " << out.times.back() << "] s";
        throw CalibrationError(os.str());
    }
    out.t_pi = dip;
    return out;
}

} // namespace dispfock
