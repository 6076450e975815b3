#pragma once

// Sideband Hamiltonians, segment propagators and the effective dispersive model.
//
// Conventions.  Angular frequencies in rad/s, hbar = 1.  sigma_z = diag(-1, +1)
// in the (down, up) basis.  A blue-sideband segment with carrier detuning Delta
// has delta_j = Delta - omega_j and frame Hamiltonian
//
//   H = -sum_j delta_j n_j + sum_j g_j (sigma_+ a_j^dag + sigma_- a_j),   g_j = eta_j Omega / 2,
//
// with W(t) = exp(+i t sum_j delta_j n_j).  The red sideband flips the signs:
// delta_j = Delta + omega_j, H0 = +sum delta_j n_j, coupling sigma_+ a_j + h.c.,
// W(t) = exp(-i t sum_j delta_j n_j).  The interaction-picture propagator of a
// segment starting at t0 is W^dag(t0 + tau) exp(-i H tau) W(t0).
//
// The carrier AC-Stark shift s = -Omega^2/(4 Delta) enters as the analytic
// factor exp(-i s sigma_z tau); the sideband Hamiltonian is written in the
// Stark-shifted spin frame so the two commute by construction.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "dispfock/errors.hpp"
#include "dispfock/fock_space.hpp"
#include "dispfock/laguerre.hpp"

namespace dispfock {

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double validity_warning_ratio = 0.2;

struct ModeSpec {
    double omega = 0.0; // rad/s
    double eta = 0.0;
};

inline void validate_modes(const std::vector<ModeSpec>& modes) {
    if (modes.empty()) throw BoundsError("at least one mode is required");
    for (const auto& m : modes) {
        if (!(m.omega > 0.0)) throw BoundsError("mode frequency must be positive");
        if (!(m.eta > 0.0 && m.eta < 1.0)) throw BoundsError("Lamb-Dicke parameter must lie in (0, 1)");
    }
}

enum class Sideband { red, blue };

struct DriveSegment {
    Sideband sideband = Sideband::blue;
    double omega_rabi = 0.0;       // carrier Rabi frequency, rad/s
    double carrier_detuning = 0.0; // Delta, rad/s
    double duration = 0.0;         // s
};

inline void validate_segment(const DriveSegment& seg) {
    if (!(seg.duration >= 0.0)) throw BoundsError("segment duration must be >= 0");
    if (!(seg.omega_rabi >= 0.0)) throw BoundsError("Rabi frequency must be >= 0");
}

inline double sideband_detuning(const ModeSpec& mode, const DriveSegment& seg) {
    return seg.sideband == Sideband::blue ? seg.carrier_detuning - mode.omega : seg.carrier_detuning + mode.omega;
}

inline std::vector<double> sideband_detunings(const std::vector<ModeSpec>& modes, const DriveSegment& seg) {
    std::vector<double> d;
    d.reserve(modes.size());
    for (const auto& m : modes) d.push_back(sideband_detuning(m, seg));
    return d;
}

/// Carrier detuning that puts the drive delta away from the given sideband of one mode.
inline double carrier_detuning_for(const ModeSpec& mode, Sideband sb, double delta) {
    return sb == Sideband::blue ? mode.omega + delta : delta - mode.omega;
}

/// Frame rates r_j with W(t) = exp(i t sum r_j n_j).
inline std::vector<double> frame_rates(const std::vector<ModeSpec>& modes, const DriveSegment& seg) {
    auto d = sideband_detunings(modes, seg);
    if (seg.sideband == Sideband::red)
        for (double& x : d) x = -x;
    return d;
}

inline double stark_shift(const DriveSegment& seg) {
    if (seg.omega_rabi == 0.0) return 0.0;
    if (seg.carrier_detuning == 0.0) throw ResonanceError("carrier detuning is zero: drive is resonant with the carrier");
    return -seg.omega_rabi * seg.omega_rabi / (4.0 * seg.carrier_detuning);
}

// ---------------------------------------------------------------------------
// Nonlinear matrix-element factors

struct NonlinearFactors {
    std::vector<std::vector<double>> f_table; // f_j(n), n = 0..dim_j-1
    std::vector<std::vector<double>> b_table; // B_j(n)

    /// M_j(n) = prod_{l != j} B_l(n_l).
    double m(int j, const Occupation& n) const {
        double p = 1.0;
        for (std::size_t l = 0; l < n.size(); ++l)
            if (static_cast<int>(l) != j) p *= b_table[l][static_cast<std::size_t>(n[l])];
        return p;
    }
    double f(int j, int n) const { return f_table[static_cast<std::size_t>(j)][static_cast<std::size_t>(n)]; }
};

inline NonlinearFactors nonlinear_factors(const std::vector<ModeSpec>& modes, const std::vector<int>& dims) {
    NonlinearFactors nf;
    for (std::size_t j = 0; j < modes.size(); ++j) {
        std::vector<double> f, b;
        // one extra entry so f(n) is available at the truncation edge
        for (int n = 0; n <= dims[j]; ++n) {
            f.push_back(laguerre_f(n, modes[j].eta));
            b.push_back(spectator_b(n, modes[j].eta));
        }
        nf.f_table.push_back(std::move(f));
        nf.b_table.push_back(std::move(b));
    }
    return nf;
}

// ---------------------------------------------------------------------------
// Hamiltonians

struct FrameHamiltonian {
    Operator matrix;                 // sideband Hamiltonian in the rotating frame
    std::vector<double> frame_rates; // W(t) = exp(i t sum r_j n_j)
    double stark = 0.0;              // analytic sigma_z coefficient (0 when disabled)
    int ion = 0;                     // driven ion
};

namespace detail {

inline FrameHamiltonian build_jc(const HilbertSpace& space, const std::vector<ModeSpec>& modes, const DriveSegment& seg,
                                 bool include_stark, int ion, const NonlinearFactors* nf) {
    validate_modes(modes);
    validate_segment(seg);
    if (static_cast<int>(modes.size()) != space.mode_count()) throw BoundsError("mode list does not match the space");
    if (ion < 0 || ion >= space.spin_count()) throw BoundsError("driven ion index out of range");
    const bool blue = seg.sideband == Sideband::blue;
    const auto delta = sideband_detunings(modes, seg);
    const std::size_t md = space.motional_dimension();
    const auto n_dim = static_cast<Eigen::Index>(space.dimension());

    FrameHamiltonian h;
    h.matrix = Operator::Zero(n_dim, n_dim);
    h.frame_rates = frame_rates(modes, seg);
    h.stark = include_stark ? stark_shift(seg) : 0.0;
    h.ion = ion;

    for (std::size_t s = 0; s < space.spin_states(); ++s) {
        for (std::size_t m = 0; m < md; ++m) {
            const Occupation& n = space.occupation(m);
            const auto i = static_cast<Eigen::Index>(s * md + m);
            double e0 = 0.0;
            for (std::size_t j = 0; j < n.size(); ++j) e0 += (blue ? -delta[j] : delta[j]) * n[j];
            h.matrix(i, i) = e0;
        }
    }

    // Couplings: blue  |down,n> <-> |up,n+e_j>, red  |down,n> <-> |up,n-e_j>.
    for (std::size_t s = 0; s < space.spin_states(); ++s) {
        if (space.spin_up(s, ion)) continue;
        const std::size_t su = space.flip_spin(s, ion);
        for (std::size_t m = 0; m < md; ++m) {
            const Occupation& n = space.occupation(m);
            for (int j = 0; j < space.mode_count(); ++j) {
                const int dj = space.mode_dims()[static_cast<std::size_t>(j)];
                const int lo = blue ? n[static_cast<std::size_t>(j)] : n[static_cast<std::size_t>(j)] - 1;
                if (lo < 0 || lo + 1 >= dj) continue;
                Occupation np = n;
                np[static_cast<std::size_t>(j)] = blue ? lo + 1 : lo;
                const double g = 0.5 * modes[static_cast<std::size_t>(j)].eta * seg.omega_rabi;
                double elem = g * std::sqrt(lo + 1.0);
                if (nf) elem *= nf->f(j, lo) * nf->m(j, n);
                const auto a = static_cast<Eigen::Index>(s * md + m);
                const auto b = static_cast<Eigen::Index>(su * md + space.motional_index(np));
                h.matrix(a, b) += elem;
                h.matrix(b, a) += elem;
            }
        }
    }
    return h;
}

} // namespace detail

/// Linear Lamb-Dicke sideband Hamiltonian.
inline FrameHamiltonian jc_frame_hamiltonian(const HilbertSpace& space, const std::vector<ModeSpec>& modes,
                                             const DriveSegment& seg, bool include_stark = true, int ion = 0) {
    return detail::build_jc(space, modes, seg, include_stark, ion, nullptr);
}

/// Sideband Hamiltonian with a_j -> f_j(n_j) a_j M_j (all Lamb-Dicke orders of the matrix elements).
inline FrameHamiltonian nonlinear_jc_hamiltonian(const HilbertSpace& space, const std::vector<ModeSpec>& modes,
                                                 const DriveSegment& seg, bool include_stark = true, int ion = 0) {
    const auto nf = nonlinear_factors(modes, space.mode_dims());
    return detail::build_jc(space, modes, seg, include_stark, ion, &nf);
}

// ---------------------------------------------------------------------------
// Propagation

/// Eigendecomposition of a frame Hamiltonian; applying it for different durations reuses the decomposition.
class Propagator {
public:
    Propagator(const HilbertSpace& space, FrameHamiltonian h) : space_(space), h_(std::move(h)) {
        if ((h_.matrix - h_.matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, h_.matrix.cwiseAbs().maxCoeff()))
            throw RepresentationError("Hamiltonian is not Hermitian");
        Eigen::SelfAdjointEigenSolver<Operator> es(h_.matrix);
        vectors_ = es.eigenvectors();
        values_ = es.eigenvalues();
    }

    const FrameHamiltonian& hamiltonian() const { return h_; }

    /// Diagonal of W(t) in the basis.
    Vector frame(double t) const {
        Vector w(static_cast<Eigen::Index>(space_.dimension()));
        const std::size_t md = space_.motional_dimension();
        for (std::size_t i = 0; i < space_.dimension(); ++i) {
            const Occupation& n = space_.occupation(i % md);
            double ph = 0.0;
            for (std::size_t j = 0; j < n.size(); ++j) ph += h_.frame_rates[j] * n[j];
            w[static_cast<Eigen::Index>(i)] = std::polar(1.0, ph * t);
        }
        return w;
    }

    /// Diagonal of the analytic Stark factor exp(-i s sigma_z tau) on the driven ion.
    Vector stark_factor(double tau) const {
        Vector d(static_cast<Eigen::Index>(space_.dimension()));
        const std::size_t md = space_.motional_dimension();
        for (std::size_t i = 0; i < space_.dimension(); ++i) {
            const double z = space_.spin_up(i / md, h_.ion) ? 1.0 : -1.0;
            d[static_cast<Eigen::Index>(i)] = std::polar(1.0, -h_.stark * z * tau);
        }
        return d;
    }

    Operator unitary(double tau, double t0 = 0.0) const {
        if (tau < 0.0) throw BoundsError("duration must be >= 0");
        Vector phases = (values_.cast<cplx>() * cplx(0.0, -tau)).array().exp();
        Operator u = vectors_ * phases.asDiagonal() * vectors_.adjoint();
        const Vector left = frame(t0 + tau).conjugate().cwiseProduct(stark_factor(tau));
        const Vector right = frame(t0);
        return left.asDiagonal() * u * right.asDiagonal();
    }

    Vector apply(const Vector& psi, double tau, double t0 = 0.0) const {
        if (tau < 0.0) throw BoundsError("duration must be >= 0");
        Vector x = frame(t0).cwiseProduct(psi);
        Vector y = vectors_.adjoint() * x;
        for (Eigen::Index k = 0; k < y.size(); ++k) y[k] *= std::polar(1.0, -values_[k] * tau);
        Vector z = vectors_ * y;
        return frame(t0 + tau).conjugate().cwiseProduct(stark_factor(tau)).cwiseProduct(z);
    }

    SpinMotionState apply(const SpinMotionState& state, double tau, double t0 = 0.0) const {
        if (!(state.space() == space_)) throw RepresentationError("state and Hamiltonian live on different spaces");
        if (state.is_pure()) return SpinMotionState::assume_valid(space_, apply(state.amplitudes(), tau, t0));
        const Operator u = unitary(tau, t0);
        Operator rho = u * state.density_matrix() * u.adjoint();
        return SpinMotionState::assume_valid(space_, Operator(0.5 * (rho + rho.adjoint())));
    }

private:
    HilbertSpace space_;
    FrameHamiltonian h_;
    Operator vectors_;
    Eigen::VectorXd values_;
};

/// Evolves over one segment starting at t_start; the result is back in the bare interaction picture.
inline SpinMotionState evolve_segment(const SpinMotionState& state, const FrameHamiltonian& h, double duration,
                                      double t_start = 0.0) {
    if (duration == 0.0) return state;
    return Propagator(state.space(), h).apply(state, duration, t_start);
}

// ---------------------------------------------------------------------------
// Effective dispersive model

struct DispersiveCoefficients {
    std::vector<double> chi;                 // rad/s
    std::vector<std::vector<double>> kappa;  // rad/s, symmetric, zero diagonal
    double stark = 0.0;                      // rad/s
    std::vector<double> validity;            // eta_j Omega sqrt(n_ref+1) / |delta_j|
    std::vector<std::vector<double>> kappa_validity; // |K_jk| / |delta_j - delta_k|
    std::vector<double> delta;               // sideband detunings, rad/s
};

inline DispersiveCoefficients dispersive_coefficients(const std::vector<ModeSpec>& modes, const DriveSegment& seg,
                                                      int n_ref = 0, bool emit_warnings = true) {
    validate_modes(modes);
    validate_segment(seg);
    DispersiveCoefficients c;
    c.delta = sideband_detunings(modes, seg);
    const std::size_t m = modes.size();
    std::vector<double> g(m);
    for (std::size_t j = 0; j < m; ++j) {
        if (c.delta[j] == 0.0) {
            std::ostringstream os;
            os << "sideband detuning of mode " << j + 1 << " is zero";
            throw ResonanceError(os.str());
        }
        g[j] = 0.5 * modes[j].eta * seg.omega_rabi;
        c.chi.push_back(-g[j] * g[j] / c.delta[j]);
        c.validity.push_back(modes[j].eta * seg.omega_rabi * std::sqrt(n_ref + 1.0) / std::abs(c.delta[j]));
    }
    c.kappa.assign(m, std::vector<double>(m, 0.0));
    c.kappa_validity.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < m; ++k) {
            if (j == k) continue;
            c.kappa[j][k] = -0.5 * g[j] * g[k] * (1.0 / c.delta[j] + 1.0 / c.delta[k]);
            const double gap = std::abs(c.delta[j] - c.delta[k]);
            c.kappa_validity[j][k] = gap > 0.0 ? std::abs(c.kappa[j][k]) / gap
                                               : (c.kappa[j][k] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        }
    }
    c.stark = stark_shift(seg);
    if (emit_warnings) {
        for (std::size_t j = 0; j < m; ++j) {
            if (c.validity[j] > validity_warning_ratio) {
                std::ostringstream os;
                os << "dispersive validity ratio " << c.validity[j] << " for mode " << j + 1 << " exceeds "
                   << validity_warning_ratio;
                warn(os.str());
            }
        }
    }
    return c;
}

/// S_j(n): number dependence of the spin splitting contributed by mode j (2 n_j + 1 in the linear model).
inline double dispersive_number_factor(int j, const Occupation& n, const std::vector<ModeSpec>& modes) {
    const auto jj = static_cast<std::size_t>(j);
    const double eta = modes[jj].eta;
    const double x = eta * eta;
    const int nj = n[jj];
    double m2 = 1.0;
    for (std::size_t l = 0; l < n.size(); ++l) {
        if (l == jj) continue;
        const double b = spectator_b(n[l], modes[l].eta);
        m2 *= b * b;
    }
    const double up = laguerre(nj, 1.0, x);
    double s = up * up / (nj + 1.0);
    if (nj > 0) {
        const double dn = laguerre(nj - 1, 1.0, x);
        s += dn * dn / nj;
    }
    return m2 * std::exp(-x) * s;
}

/// Phi_n(t) = t sum_j chi_j S_j(n).
inline double nonlinear_phase(const Occupation& n, const std::vector<double>& chi, const std::vector<ModeSpec>& modes,
                              double t) {
    double s = 0.0;
    for (std::size_t j = 0; j < chi.size(); ++j) s += chi[j] * dispersive_number_factor(static_cast<int>(j), n, modes);
    return t * s;
}

inline double nonlinear_phase(const Occupation& n, const DispersiveCoefficients& c, const std::vector<ModeSpec>& modes,
                              double t) {
    return nonlinear_phase(n, c.chi, modes, t);
}

/// Second-order level shifts (down, up) of |s, n> for the driven ion, excluding Stark.
inline std::pair<double, double> dispersive_level_shifts(const Occupation& n, const std::vector<ModeSpec>& modes,
                                                         const DriveSegment& seg, bool nonlinear) {
    const auto delta = sideband_detunings(modes, seg);
    const bool blue = seg.sideband == Sideband::blue;
    double down = 0.0, up = 0.0;
    for (std::size_t j = 0; j < modes.size(); ++j) {
        if (delta[j] == 0.0) throw ResonanceError("sideband detuning is zero");
        const double g = 0.5 * modes[j].eta * seg.omega_rabi;
        const int nj = n[j];
        double w_raise = nj + 1.0; // |<n+1|a^dag|n>|^2 with factors
        double w_lower = nj;       // |<n-1|a|n>|^2 with factors
        if (nonlinear) {
            double m = 1.0;
            for (std::size_t l = 0; l < n.size(); ++l)
                if (l != j) m *= spectator_b(n[l], modes[l].eta);
            const double fr = laguerre_f(nj, modes[j].eta);
            w_raise *= fr * fr * m * m;
            if (nj > 0) {
                const double fl = laguerre_f(nj - 1, modes[j].eta);
                w_lower *= fl * fl * m * m;
            }
        }
        const double k = g * g / delta[j];
        if (blue) {
            down += k * w_raise;
            up -= k * w_lower;
        } else {
            down += k * w_lower;
            up -= k * w_raise;
        }
    }
    return {down, up};
}

/// Spin-independent part (E_up + E_down)/2 of the dispersive shift: a diagnostic, never compensated.
inline double spin_independent_shift(const Occupation& n, const std::vector<ModeSpec>& modes, const DriveSegment& seg,
                                     bool nonlinear = true) {
    const auto [down, up] = dispersive_level_shifts(n, modes, seg, nonlinear);
    return 0.5 * (down + up);
}

/// Diagonal energies of the effective model (dispersive shifts plus the optional Stark term) on every basis state.
inline Eigen::VectorXd effective_energies(const HilbertSpace& space, const std::vector<ModeSpec>& modes,
                                          const DriveSegment& seg, bool nonlinear, bool include_stark = true,
                                          int ion = 0) {
    validate_modes(modes);
    const std::size_t md = space.motional_dimension();
    const double s = include_stark ? stark_shift(seg) : 0.0;
    std::vector<std::pair<double, double>> shifts(md);
    for (std::size_t m = 0; m < md; ++m) shifts[m] = dispersive_level_shifts(space.occupation(m), modes, seg, nonlinear);
    Eigen::VectorXd e(static_cast<Eigen::Index>(space.dimension()));
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        const bool up = space.spin_up(i / md, ion);
        const auto& sh = shifts[i % md];
        e[static_cast<Eigen::Index>(i)] = (up ? sh.second : sh.first) + (up ? s : -s);
    }
    return e;
}

/// Applies a diagonal Hamiltonian for time tau.
inline SpinMotionState evolve_diagonal(const SpinMotionState& state, const Eigen::VectorXd& energies, double tau) {
    Vector ph(energies.size());
    for (Eigen::Index i = 0; i < energies.size(); ++i) ph[i] = std::polar(1.0, -energies[i] * tau);
    if (state.is_pure()) return SpinMotionState::assume_valid(state.space(), Vector(ph.cwiseProduct(state.amplitudes())));
    Operator rho = ph.asDiagonal() * state.density_matrix() * ph.conjugate().asDiagonal();
    return SpinMotionState::assume_valid(state.space(), std::move(rho));
}

// ---------------------------------------------------------------------------
// Dephasing

/// gamma_n = sum_j gamma_j (2 n_j + 1).
inline double decay_rate(const Occupation& n, const std::vector<double>& gamma) {
    double g = 0.0;
    for (std::size_t j = 0; j < gamma.size() && j < n.size(); ++j) g += gamma[j] * (2.0 * n[j] + 1.0);
    return g;
}

/// Spin-coherence decay: element <s,n|rho|s',n'> is damped by exp(-(gamma_n + gamma_n') t / 2) per differing ion.
inline SpinMotionState dephase(const SpinMotionState& state, const std::vector<double>& gamma, double t) {
    if (state.is_pure()) throw RepresentationError("dephasing needs a density operator; promote with to_density()");
    if (t < 0.0) throw BoundsError("dephasing time must be >= 0");
    for (double g : gamma)
        if (g < 0.0) throw BoundsError("decay rates must be >= 0");
    const HilbertSpace& sp = state.space();
    const std::size_t md = sp.motional_dimension();
    std::vector<double> rate(md);
    for (std::size_t m = 0; m < md; ++m) rate[m] = decay_rate(sp.occupation(m), gamma);
    Operator rho = state.density_matrix();
    const auto dim = static_cast<Eigen::Index>(sp.dimension());
    for (Eigen::Index a = 0; a < dim; ++a) {
        const auto [sa, ma] = sp.split(static_cast<std::size_t>(a));
        for (Eigen::Index b = 0; b < dim; ++b) {
            const auto [sb, mb] = sp.split(static_cast<std::size_t>(b));
            if (sa == sb) continue;
            const int differing = std::popcount(sa ^ sb);
            rho(a, b) *= std::exp(-0.5 * (rate[ma] + rate[mb]) * t * differing);
        }
    }
    return SpinMotionState::assume_valid(sp, std::move(rho));
}

// ---------------------------------------------------------------------------
// Spin Bloch-vector azimuth on one motional component

/// arg(c_down) - arg(c_up) for the spin amplitudes attached to occupation n (single-ion pure state).
inline double spin_azimuth(const SpinMotionState& state, const Occupation& n) {
    const HilbertSpace& sp = state.space();
    if (sp.spin_count() != 1) throw RepresentationError("azimuth is defined for a single spin");
    const auto& v = state.amplitudes();
    const cplx dn = v[static_cast<Eigen::Index>(sp.index(0, n))];
    const cplx up = v[static_cast<Eigen::Index>(sp.index(1, n))];
    return std::arg(dn * std::conj(up));
}

// ---------------------------------------------------------------------------
// Multi-ion analytic model

struct IonDrive {
    double omega_rabi = 0.0;  // rad/s
    std::vector<double> eta;  // per mode
    DriveSegment segment;     // sideband and carrier detuning seen by this ion
};

struct MultiIonModel {
    std::vector<std::vector<double>> chi_matrix; // chi_ij, rad/s
    std::vector<std::vector<double>> eta_matrix;
    std::vector<double> omega_rabi;

    /// SDR angles theta_i(t) = 2 t chi_i for ion i.
    std::vector<double> theta(int ion, double t) const {
        std::vector<double> th;
        for (double c : chi_matrix.at(static_cast<std::size_t>(ion))) th.push_back(2.0 * t * c);
        return th;
    }
};

inline MultiIonModel multi_ion_model(const std::vector<IonDrive>& ions, const std::vector<ModeSpec>& modes) {
    if (ions.empty()) throw BoundsError("at least one ion is required");
    MultiIonModel model;
    for (const auto& ion : ions) {
        if (ion.eta.size() != modes.size()) throw BoundsError("per-ion eta list must have one entry per mode");
        std::vector<ModeSpec> local = modes;
        for (std::size_t j = 0; j < modes.size(); ++j) local[j].eta = ion.eta[j];
        DriveSegment seg = ion.segment;
        seg.omega_rabi = ion.omega_rabi;
        const auto c = dispersive_coefficients(local, seg);
        model.chi_matrix.push_back(c.chi);
        model.eta_matrix.push_back(ion.eta);
        model.omega_rabi.push_back(ion.omega_rabi);
    }
    return model;
}

} // namespace dispfock
