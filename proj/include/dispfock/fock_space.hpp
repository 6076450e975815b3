#pragma once

// Truncated multimode Fock space with N two-level spins.
//
// Basis ordering (part of the public contract, serialized states rely on it):
// the spin string is the slowest index, followed by mode 1, ..., mode M with
// mode M fastest.  Within the spin string ion 1 is the most significant bit and
// bit value 1 means spin up.  Amplitude index:
//
//   index = s * prod(d_j) + n_1 * prod_{j>1}(d_j) + ... + n_M

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "dispfock/errors.hpp"

namespace dispfock {

using cplx = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Operator = Eigen::MatrixXcd;
using Occupation = std::vector<int>;

enum class Spin : int { down = 0, up = 1 };

inline constexpr std::size_t default_dimension_cap = 65536;
inline constexpr double state_tolerance = 1e-10;
inline constexpr double default_leakage_threshold = 1e-4;

class HilbertSpace {
public:
    HilbertSpace(std::vector<int> mode_dims, int spin_count, std::size_t dimension_cap = default_dimension_cap)
        : mode_dims_(std::move(mode_dims)), spin_count_(spin_count) {
        if (mode_dims_.empty()) throw SizingError("at least one motional mode is required");
        if (spin_count_ < 1) throw SizingError("spin_count must be >= 1");
        if (spin_count_ > 20) throw SizingError("spin_count " + std::to_string(spin_count_) + " exceeds 20");
        std::size_t motional = 1;
        std::ostringstream product;
        product << "2^" << spin_count_;
        for (int d : mode_dims_) {
            if (d < 1) throw SizingError("mode dimension must be >= 1, got " + std::to_string(d));
            motional *= static_cast<std::size_t>(d);
            product << " * " << d;
        }
        motional_dim_ = motional;
        spin_states_ = std::size_t{1} << spin_count_;
        dim_ = spin_states_ * motional_dim_;
        if (dim_ > dimension_cap) {
            product << " = " << dim_ << " exceeds the dimension cap " << dimension_cap;
            throw SizingError(product.str());
        }
        strides_.assign(mode_dims_.size(), 1);
        for (std::size_t j = mode_dims_.size() - 1; j > 0; --j)
            strides_[j - 1] = strides_[j] * static_cast<std::size_t>(mode_dims_[j]);
        occupations_.reserve(motional_dim_);
        for (std::size_t m = 0; m < motional_dim_; ++m) {
            Occupation n(mode_dims_.size());
            std::size_t rest = m;
            for (std::size_t j = 0; j < mode_dims_.size(); ++j) {
                n[j] = static_cast<int>(rest / strides_[j]);
                rest %= strides_[j];
            }
            occupations_.push_back(std::move(n));
        }
    }

    const std::vector<int>& mode_dims() const { return mode_dims_; }
    int mode_count() const { return static_cast<int>(mode_dims_.size()); }
    int spin_count() const { return spin_count_; }
    std::size_t spin_states() const { return spin_states_; }
    std::size_t motional_dimension() const { return motional_dim_; }
    std::size_t dimension() const { return dim_; }

    bool contains(std::span<const int> n) const {
        if (n.size() != mode_dims_.size()) return false;
        for (std::size_t j = 0; j < n.size(); ++j)
            if (n[j] < 0 || n[j] >= mode_dims_[j]) return false;
        return true;
    }

    std::size_t motional_index(std::span<const int> n) const {
        if (!contains(n)) throw BoundsError("occupation " + to_string(n) + " outside truncation " + to_string(mode_dims_));
        std::size_t m = 0;
        for (std::size_t j = 0; j < n.size(); ++j) m += static_cast<std::size_t>(n[j]) * strides_[j];
        return m;
    }

    std::size_t index(std::size_t spin_string, std::span<const int> n) const {
        if (spin_string >= spin_states_) throw BoundsError("spin string index out of range");
        return spin_string * motional_dim_ + motional_index(n);
    }

    /// Motional stride of mode j inside one spin block.
    std::size_t stride(int mode) const { return strides_.at(static_cast<std::size_t>(mode)); }

    const Occupation& occupation(std::size_t motional_index) const { return occupations_.at(motional_index); }

    /// (spin string, motional index) of a full-space index.
    std::pair<std::size_t, std::size_t> split(std::size_t index) const {
        return {index / motional_dim_, index % motional_dim_};
    }

    bool spin_up(std::size_t spin_string, int ion) const {
        return ((spin_string >> (spin_count_ - 1 - ion)) & 1U) != 0;
    }

    std::size_t flip_spin(std::size_t spin_string, int ion) const {
        return spin_string ^ (std::size_t{1} << (spin_count_ - 1 - ion));
    }

    std::size_t spin_string(std::span<const Spin> spins) const {
        if (spins.empty()) return 0;
        if (static_cast<int>(spins.size()) != spin_count_) throw BoundsError("spin label count does not match spin_count");
        std::size_t s = 0;
        for (Spin sp : spins) s = (s << 1) | static_cast<std::size_t>(sp);
        return s;
    }

    friend bool operator==(const HilbertSpace& a, const HilbertSpace& b) {
        return a.mode_dims_ == b.mode_dims_ && a.spin_count_ == b.spin_count_;
    }

    static std::string to_string(std::span<const int> v) {
        std::string s = "(";
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s + ")";
    }

private:
    std::vector<int> mode_dims_;
    int spin_count_;
    std::size_t spin_states_ = 0;
    std::size_t motional_dim_ = 0;
    std::size_t dim_ = 0;
    std::vector<std::size_t> strides_;
    std::vector<Occupation> occupations_;
};

inline HilbertSpace make_space(std::vector<int> mode_dims, int spin_count,
                               std::size_t dimension_cap = default_dimension_cap) {
    return HilbertSpace(std::move(mode_dims), spin_count, dimension_cap);
}

/// Pure state or density operator over spin (x) motion.
class SpinMotionState {
public:
    enum class Representation { pure, density };

    static SpinMotionState pure(HilbertSpace space, Vector amplitudes, double tol = state_tolerance) {
        SpinMotionState s(std::move(space), std::move(amplitudes));
        s.validate(tol);
        return s;
    }

    static SpinMotionState density(HilbertSpace space, Operator rho, double tol = state_tolerance) {
        SpinMotionState s(std::move(space), std::move(rho));
        s.validate(tol);
        return s;
    }

    /// Skips validation; the caller guarantees the invariants (unitary images, renormalised projections).
    static SpinMotionState assume_valid(HilbertSpace space, Vector amplitudes) {
        return SpinMotionState(std::move(space), std::move(amplitudes));
    }
    static SpinMotionState assume_valid(HilbertSpace space, Operator rho) {
        return SpinMotionState(std::move(space), std::move(rho));
    }

    const HilbertSpace& space() const { return space_; }
    Representation representation() const {
        return std::holds_alternative<Vector>(data_) ? Representation::pure : Representation::density;
    }
    bool is_pure() const { return representation() == Representation::pure; }

    const Vector& amplitudes() const {
        if (!is_pure()) throw RepresentationError("state is a density operator, not a pure vector");
        return std::get<Vector>(data_);
    }
    const Operator& density_matrix() const {
        if (is_pure()) throw RepresentationError("state is a pure vector, not a density operator");
        return std::get<Operator>(data_);
    }

    SpinMotionState to_density() const {
        if (!is_pure()) return *this;
        const Vector& v = amplitudes();
        return SpinMotionState(space_, Operator(v * v.adjoint()));
    }

    /// Squared norm (pure) or trace (density).
    double weight() const {
        if (is_pure()) return amplitudes().squaredNorm();
        return density_matrix().trace().real();
    }

    void validate(double tol = state_tolerance) const {
        if (is_pure()) {
            const Vector& v = amplitudes();
            if (static_cast<std::size_t>(v.size()) != space_.dimension())
                throw RepresentationError("amplitude vector size does not match the space dimension");
            const double norm = v.norm();
            if (std::abs(norm - 1.0) > tol)
                throw RepresentationError("pure state norm " + std::to_string(norm) + " differs from 1");
            return;
        }
        const Operator& rho = density_matrix();
        if (static_cast<std::size_t>(rho.rows()) != space_.dimension() || rho.rows() != rho.cols())
            throw RepresentationError("density operator shape does not match the space dimension");
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol)
            throw RepresentationError("density operator is not Hermitian");
        if (std::abs(rho.trace().real() - 1.0) > tol || std::abs(rho.trace().imag()) > tol)
            throw RepresentationError("density operator trace differs from 1");
        Eigen::SelfAdjointEigenSolver<Operator> es(rho, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol)
            throw RepresentationError("density operator is not positive semidefinite");
    }

private:
    SpinMotionState(HilbertSpace space, Vector v) : space_(std::move(space)), data_(std::move(v)) {}
    SpinMotionState(HilbertSpace space, Operator m) : space_(std::move(space)), data_(std::move(m)) {}

    HilbertSpace space_;
    std::variant<Vector, Operator> data_;
};

/// Probability of spin up on one ion.
inline double probability_up(const SpinMotionState& state, int ion = 0) {
    const HilbertSpace& sp = state.space();
    const std::size_t md = sp.motional_dimension();
    double p = 0.0;
    for (std::size_t s = 0; s < sp.spin_states(); ++s) {
        if (!sp.spin_up(s, ion)) continue;
        if (state.is_pure())
            p += state.amplitudes().segment(static_cast<Eigen::Index>(s * md), static_cast<Eigen::Index>(md)).squaredNorm();
        else
            p += state.density_matrix().diagonal().segment(static_cast<Eigen::Index>(s * md), static_cast<Eigen::Index>(md)).real().sum();
    }
    return p;
}

/// Populations p_n; entries need not sum to one under truncation.
class FockDistribution {
public:
    FockDistribution() = default;
    explicit FockDistribution(std::map<Occupation, double> entries) : entries_(std::move(entries)) {
        for (const auto& [n, p] : entries_) {
            if (!std::isfinite(p) || p < 0.0)
                throw BoundsError("population of " + HilbertSpace::to_string(n) + " is negative or not finite");
        }
    }

    const std::map<Occupation, double>& entries() const { return entries_; }
    double probability(const Occupation& n) const {
        auto it = entries_.find(n);
        return it == entries_.end() ? 0.0 : it->second;
    }
    double total() const {
        double s = 0.0;
        for (const auto& e : entries_) s += e.second;
        return s;
    }
    /// Physical states satisfy sum p <= 1; fitted distributions are not forced to.
    bool subnormalized(double tol = 1e-9) const { return total() <= 1.0 + tol; }
    int mode_count() const { return entries_.empty() ? 0 : static_cast<int>(entries_.begin()->first.size()); }
    bool empty() const { return entries_.empty(); }

    void set(const Occupation& n, double p) {
        if (!std::isfinite(p) || p < 0.0) throw BoundsError("population must be finite and non-negative");
        entries_[n] = p;
    }

private:
    std::map<Occupation, double> entries_;
};

/// Diagonal of the motional reduced state; the spin is traced out.
inline FockDistribution fock_populations(const SpinMotionState& state) {
    const HilbertSpace& sp = state.space();
    const std::size_t md = sp.motional_dimension();
    std::vector<double> p(md, 0.0);
    for (std::size_t s = 0; s < sp.spin_states(); ++s) {
        for (std::size_t m = 0; m < md; ++m) {
            const std::size_t i = s * md + m;
            if (state.is_pure())
                p[m] += std::norm(state.amplitudes()[static_cast<Eigen::Index>(i)]);
            else
                p[m] += state.density_matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
        }
    }
    std::map<Occupation, double> entries;
    for (std::size_t m = 0; m < md; ++m) entries.emplace(sp.occupation(m), std::max(p[m], 0.0));
    return FockDistribution(std::move(entries));
}

/// Sum of p_n (-1)^{sum_{j in mask} n_j}.  Mode indices are zero-based; an empty mask gives +1.
inline double parity_expectation(const FockDistribution& dist, std::span<const int> mode_mask) {
    if (mode_mask.empty()) return 1.0;
    double v = 0.0;
    for (const auto& [n, p] : dist.entries()) {
        int s = 0;
        for (int j : mode_mask) s += n.at(static_cast<std::size_t>(j));
        v += (s % 2 == 0) ? p : -p;
    }
    return v;
}

inline double parity_expectation(const SpinMotionState& state, std::span<const int> mode_mask) {
    return parity_expectation(fock_populations(state), mode_mask);
}

namespace detail {

/// Truncated coherent-state amplitudes e^{-|a|^2/2} a^n / sqrt(n!) by recurrence.
inline std::vector<cplx> coherent_amplitudes(cplx alpha, int dim) {
    std::vector<cplx> c(static_cast<std::size_t>(dim));
    c[0] = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n < dim; ++n) c[static_cast<std::size_t>(n)] = c[static_cast<std::size_t>(n - 1)] * alpha / std::sqrt(static_cast<double>(n));
    return c;
}

/// Poisson tail mass beyond the truncation.
inline double coherent_leakage(cplx alpha, int dim) {
    double kept = 0.0;
    for (const cplx& a : coherent_amplitudes(alpha, dim)) kept += std::norm(a);
    return std::max(0.0, 1.0 - kept);
}

/// Motional product vector from per-mode amplitude lists.
inline Vector product_motional(const HilbertSpace& sp, const std::vector<std::vector<cplx>>& per_mode) {
    Vector v(static_cast<Eigen::Index>(sp.motional_dimension()));
    for (std::size_t m = 0; m < sp.motional_dimension(); ++m) {
        const Occupation& n = sp.occupation(m);
        cplx a = 1.0;
        for (std::size_t j = 0; j < n.size(); ++j) a *= per_mode[j][static_cast<std::size_t>(n[j])];
        v[static_cast<Eigen::Index>(m)] = a;
    }
    return v;
}

inline SpinMotionState embed(const HilbertSpace& sp, const Vector& motional, std::span<const Spin> spins) {
    const double norm = motional.norm();
    if (norm < 1e-300) throw ZeroVectorError("motional state vanishes inside the truncated space");
    Vector full = Vector::Zero(static_cast<Eigen::Index>(sp.dimension()));
    const std::size_t s = sp.spin_string(spins);
    full.segment(static_cast<Eigen::Index>(s * sp.motional_dimension()), motional.size()) = motional / norm;
    return SpinMotionState::pure(sp, std::move(full));
}

inline void check_leakage(cplx alpha, int dim, double threshold, int mode) {
    const double leak = coherent_leakage(alpha, dim);
    if (leak > threshold) {
        std::ostringstream os;
        os << "truncation leakage " << leak << " for |alpha| = " << std::abs(alpha) << " in mode " << mode + 1
           << " (dim " << dim << ") exceeds " << threshold;
        warn(os.str());
    }
}

} // namespace detail

inline SpinMotionState fock_state(const HilbertSpace& space, const Occupation& n, std::span<const Spin> spins = {}) {
    Vector full = Vector::Zero(static_cast<Eigen::Index>(space.dimension()));
    full[static_cast<Eigen::Index>(space.index(space.spin_string(spins), n))] = 1.0;
    return SpinMotionState::assume_valid(space, std::move(full));
}

/// Product of truncated coherent states, renormalised; warns when leakage exceeds the threshold.
inline SpinMotionState coherent_state(const HilbertSpace& space, const std::vector<cplx>& alphas,
                                      std::span<const Spin> spins = {},
                                      double leakage_threshold = default_leakage_threshold) {
    if (static_cast<int>(alphas.size()) != space.mode_count())
        throw BoundsError("one coherent amplitude per mode is required");
    std::vector<std::vector<cplx>> per_mode;
    for (int j = 0; j < space.mode_count(); ++j) {
        const int d = space.mode_dims()[static_cast<std::size_t>(j)];
        detail::check_leakage(alphas[static_cast<std::size_t>(j)], d, leakage_threshold, j);
        per_mode.push_back(detail::coherent_amplitudes(alphas[static_cast<std::size_t>(j)], d));
    }
    return detail::embed(space, detail::product_motional(space, per_mode), spins);
}

/// |alpha> + sign |-alpha> on one mode (others in vacuum), normalised with <alpha|-alpha> = e^{-2|alpha|^2}.
inline SpinMotionState cat_state(const HilbertSpace& space, cplx alpha, int sign, int mode,
                                 std::span<const Spin> spins = {},
                                 double leakage_threshold = default_leakage_threshold) {
    if (sign != 1 && sign != -1) throw BoundsError("cat sign must be +1 or -1");
    if (mode < 0 || mode >= space.mode_count()) throw BoundsError("cat mode index out of range");
    if (sign == -1 && std::abs(alpha) == 0.0) throw ZeroVectorError("odd cat state is undefined at alpha = 0");
    const double overlap = std::exp(-2.0 * std::norm(alpha));
    const double norm = 1.0 / std::sqrt(2.0 * (1.0 + sign * overlap));
    std::vector<std::vector<cplx>> per_mode;
    for (int j = 0; j < space.mode_count(); ++j) {
        const int d = space.mode_dims()[static_cast<std::size_t>(j)];
        std::vector<cplx> c(static_cast<std::size_t>(d), 0.0);
        if (j == mode) {
            detail::check_leakage(alpha, d, leakage_threshold, j);
            auto plus = detail::coherent_amplitudes(alpha, d);
            auto minus = detail::coherent_amplitudes(-alpha, d);
            for (std::size_t n = 0; n < c.size(); ++n) c[n] = norm * (plus[n] + static_cast<double>(sign) * minus[n]);
        } else {
            c[0] = 1.0;
        }
        per_mode.push_back(std::move(c));
    }
    return detail::embed(space, detail::product_motional(space, per_mode), spins);
}

/// |alpha,alpha> + sign |-alpha,-alpha> on modes 1 and 2 (remaining modes in vacuum).
inline SpinMotionState ecs_state(const HilbertSpace& space, cplx alpha, int sign, std::span<const Spin> spins = {},
                                 double leakage_threshold = default_leakage_threshold) {
    if (sign != 1 && sign != -1) throw BoundsError("ECS sign must be +1 or -1");
    if (space.mode_count() < 2) throw BoundsError("an entangled coherent state needs two modes");
    if (sign == -1 && std::abs(alpha) == 0.0) throw ZeroVectorError("odd ECS is undefined at alpha = 0");
    std::vector<std::vector<cplx>> plus, minus;
    for (int j = 0; j < space.mode_count(); ++j) {
        const int d = space.mode_dims()[static_cast<std::size_t>(j)];
        if (j < 2) {
            detail::check_leakage(alpha, d, leakage_threshold, j);
            plus.push_back(detail::coherent_amplitudes(alpha, d));
            minus.push_back(detail::coherent_amplitudes(-alpha, d));
        } else {
            std::vector<cplx> vac(static_cast<std::size_t>(d), 0.0);
            vac[0] = 1.0;
            plus.push_back(vac);
            minus.push_back(vac);
        }
    }
    const double overlap = std::exp(-4.0 * std::norm(alpha));
    const double norm = 1.0 / std::sqrt(2.0 * (1.0 + sign * overlap));
    Vector v = norm * (detail::product_motional(space, plus) + static_cast<double>(sign) * detail::product_motional(space, minus));
    return detail::embed(space, v, spins);
}

// Ideal (untruncated) distributions restricted to max_j n_j <= n_max.  Their totals are
// the ideal population coverage of a truncated fit.

inline FockDistribution coherent_distribution(const std::vector<cplx>& alphas, int n_max) {
    std::vector<std::vector<double>> w;
    for (const cplx& a : alphas) {
        std::vector<double> wj;
        for (const cplx& c : detail::coherent_amplitudes(a, n_max + 1)) wj.push_back(std::norm(c));
        w.push_back(std::move(wj));
    }
    HilbertSpace grid(std::vector<int>(alphas.size(), n_max + 1), 1);
    std::map<Occupation, double> entries;
    for (std::size_t m = 0; m < grid.motional_dimension(); ++m) {
        const Occupation& n = grid.occupation(m);
        double p = 1.0;
        for (std::size_t j = 0; j < n.size(); ++j) p *= w[j][static_cast<std::size_t>(n[j])];
        entries.emplace(n, p);
    }
    return FockDistribution(std::move(entries));
}

inline FockDistribution cat_distribution(cplx alpha, int sign, int n_max) {
    if (sign == -1 && std::abs(alpha) == 0.0) throw ZeroVectorError("odd cat state is undefined at alpha = 0");
    const double norm2 = 1.0 / (2.0 * (1.0 + sign * std::exp(-2.0 * std::norm(alpha))));
    auto plus = detail::coherent_amplitudes(alpha, n_max + 1);
    std::map<Occupation, double> entries;
    for (int n = 0; n <= n_max; ++n) {
        const cplx c = plus[static_cast<std::size_t>(n)] * (1.0 + sign * ((n % 2 == 0) ? 1.0 : -1.0));
        entries.emplace(Occupation{n}, norm2 * std::norm(c));
    }
    return FockDistribution(std::move(entries));
}

inline FockDistribution ecs_distribution(cplx alpha, int sign, int n_max) {
    if (sign == -1 && std::abs(alpha) == 0.0) throw ZeroVectorError("odd ECS is undefined at alpha = 0");
    const double norm2 = 1.0 / (2.0 * (1.0 + sign * std::exp(-4.0 * std::norm(alpha))));
    auto c = detail::coherent_amplitudes(alpha, n_max + 1);
    std::map<Occupation, double> entries;
    for (int a = 0; a <= n_max; ++a) {
        for (int b = 0; b <= n_max; ++b) {
            const double par = ((a + b) % 2 == 0) ? 1.0 : -1.0;
            const cplx amp = c[static_cast<std::size_t>(a)] * c[static_cast<std::size_t>(b)] * (1.0 + sign * par);
            entries.emplace(Occupation{a, b}, norm2 * std::norm(amp));
        }
    }
    return FockDistribution(std::move(entries));
}

/// Incoherent mixture w1 * rho1 + w2 * rho2 of two states on the same space (density output).
inline SpinMotionState mixture(const SpinMotionState& a, double weight_a, const SpinMotionState& b) {
    if (!(a.space() == b.space())) throw RepresentationError("mixture of states on different spaces");
    if (weight_a < 0.0 || weight_a > 1.0) throw BoundsError("mixture weight must lie in [0, 1]");
    Operator rho = weight_a * a.to_density().density_matrix() + (1.0 - weight_a) * b.to_density().density_matrix();
    return SpinMotionState::density(a.space(), std::move(rho));
}

} // namespace dispfock
