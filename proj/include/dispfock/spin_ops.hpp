#pragma once

// Single-spin rotations and the diagonal spin-dependent rotation (SDR).

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <vector>

#include "dispfock/errors.hpp"
#include "dispfock/fock_space.hpp"

namespace dispfock {

using Spin2 = Eigen::Matrix2cd;

enum class Axis { x, y, z };

inline Spin2 pauli(Axis a) {
    Spin2 m;
    const cplx i(0.0, 1.0);
    // basis order (down, up), sigma_z = diag(-1, +1)
    switch (a) {
    case Axis::x: m << 0.0, 1.0, 1.0, 0.0; break;
    case Axis::y: m << 0.0, i, -i, 0.0; break;
    case Axis::z: m << -1.0, 0.0, 0.0, 1.0; break;
    }
    return m;
}

/// sigma_phi = cos(phi) sigma_x + sin(phi) sigma_y.
inline Spin2 pauli_phi(double phi) {
    return std::cos(phi) * pauli(Axis::x) + std::sin(phi) * pauli(Axis::y);
}

/// R = exp(-i sigma theta / 2) for a Pauli-like sigma with sigma^2 = 1.
inline Spin2 rotation_from(const Spin2& sigma, double theta) {
    return std::cos(0.5 * theta) * Spin2::Identity() - cplx(0.0, std::sin(0.5 * theta)) * sigma;
}

inline Spin2 rotation(Axis a, double theta) { return rotation_from(pauli(a), theta); }
inline Spin2 rotation_phi(double phi, double theta) { return rotation_from(pauli_phi(phi), theta); }

/// Lifts a 2x2 unitary acting on one ion to the full space.  ion = -1 acts on every ion.
inline Operator lift_spin_unitary(const HilbertSpace& space, const Spin2& u, int ion = -1) {
    const auto dim = static_cast<Eigen::Index>(space.dimension());
    Operator full = Operator::Identity(dim, dim);
    const int first = ion < 0 ? 0 : ion;
    const int last = ion < 0 ? space.spin_count() - 1 : ion;
    if (first < 0 || last >= space.spin_count()) throw BoundsError("ion index out of range");
    const std::size_t md = space.motional_dimension();
    for (int k = first; k <= last; ++k) {
        Operator one = Operator::Zero(dim, dim);
        for (std::size_t s = 0; s < space.spin_states(); ++s) {
            const int bit = space.spin_up(s, k) ? 1 : 0;
            const std::size_t partner = space.flip_spin(s, k);
            for (std::size_t m = 0; m < md; ++m) {
                const auto r = static_cast<Eigen::Index>(s * md + m);
                one(r, r) = u(bit, bit);
                one(static_cast<Eigen::Index>(partner * md + m), r) = u(1 - bit, bit);
            }
        }
        full = one * full;
    }
    return full;
}

namespace detail {

inline void rotate_rows(Operator& m, const HilbertSpace& sp, const Spin2& u, int ion) {
    const std::size_t md = sp.motional_dimension();
    for (std::size_t s = 0; s < sp.spin_states(); ++s) {
        if (sp.spin_up(s, ion)) continue;
        const std::size_t su = sp.flip_spin(s, ion);
        for (std::size_t k = 0; k < md; ++k) {
            const auto a = static_cast<Eigen::Index>(s * md + k);
            const auto b = static_cast<Eigen::Index>(su * md + k);
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const cplx x = m(a, c), y = m(b, c);
                m(a, c) = u(0, 0) * x + u(0, 1) * y;
                m(b, c) = u(1, 0) * x + u(1, 1) * y;
            }
        }
    }
}

} // namespace detail

/// Applies a 2x2 spin unitary to one ion (ion = -1: to every ion) without forming the full operator.
inline SpinMotionState apply_spin_unitary(const SpinMotionState& state, const Spin2& u, int ion = -1) {
    const HilbertSpace& sp = state.space();
    const int first = ion < 0 ? 0 : ion;
    const int last = ion < 0 ? sp.spin_count() - 1 : ion;
    if (first < 0 || last >= sp.spin_count()) throw BoundsError("ion index out of range");
    if (state.is_pure()) {
        Operator v = state.amplitudes();
        for (int k = first; k <= last; ++k) detail::rotate_rows(v, sp, u, k);
        return SpinMotionState::assume_valid(sp, Vector(v.col(0)));
    }
    Operator rho = state.density_matrix();
    for (int k = first; k <= last; ++k) {
        detail::rotate_rows(rho, sp, u, k);
        rho.adjointInPlace();
        detail::rotate_rows(rho, sp, u, k);
        rho.adjointInPlace();
    }
    return SpinMotionState::assume_valid(sp, std::move(rho));
}

/// Full-space operator for R_axis(angle).
inline Operator spin_rotation(const HilbertSpace& space, Axis axis, double angle, int ion = -1) {
    return lift_spin_unitary(space, rotation(axis, angle), ion);
}

inline Operator spin_rotation_phi(const HilbertSpace& space, double phi, double angle, int ion = -1) {
    return lift_spin_unitary(space, rotation_phi(phi, angle), ion);
}

/// Diagonal of exp(-i sigma_z theta.n / 2) on the given ion.  The +1/2 offset is not included.
inline Vector sdr_diagonal(const HilbertSpace& space, const std::vector<double>& theta, int ion = 0) {
    if (static_cast<int>(theta.size()) != space.mode_count()) throw BoundsError("one SDR angle per mode is required");
    const std::size_t md = space.motional_dimension();
    Vector d(static_cast<Eigen::Index>(space.dimension()));
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        const Occupation& n = space.occupation(i % md);
        double tn = 0.0;
        for (std::size_t j = 0; j < n.size(); ++j) tn += theta[j] * n[j];
        const double z = space.spin_up(i / md, ion) ? 1.0 : -1.0;
        d[static_cast<Eigen::Index>(i)] = std::polar(1.0, -0.5 * z * tn);
    }
    return d;
}

inline Operator sdr_unitary(const HilbertSpace& space, const std::vector<double>& theta, int ion = 0) {
    return sdr_diagonal(space, theta, ion).asDiagonal();
}

inline SpinMotionState apply_diagonal(const SpinMotionState& state, const Vector& d) {
    if (state.is_pure()) return SpinMotionState::assume_valid(state.space(), Vector(d.cwiseProduct(state.amplitudes())));
    Operator rho = d.asDiagonal() * state.density_matrix() * d.conjugate().asDiagonal();
    return SpinMotionState::assume_valid(state.space(), std::move(rho));
}

} // namespace dispfock
