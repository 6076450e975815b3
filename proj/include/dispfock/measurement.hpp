#pragma once

// Photon-count detection, mid-circuit collapse and the single-shot Fock estimator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>
#include <vector>

#include "dispfock/errors.hpp"
#include "dispfock/fock_space.hpp"
#include "dispfock/protocol.hpp"
#include "dispfock/rng.hpp"
#include "dispfock/spin_ops.hpp"

namespace dispfock {

inline constexpr double numerical_floor = 1e-14;

struct DetectionModel {
    double lambda_bright = 5.0;
    double lambda_dark = 0.05;
    int threshold_pass = 0;         // A: N <= threshold_pass
    int threshold_discriminate = 1; // B: N <= threshold_discriminate

    static DetectionModel perfect() {
        return {std::numeric_limits<double>::infinity(), 0.0, 0, 1};
    }

    void validate() const {
        if (!(lambda_bright > lambda_dark) || !(lambda_dark >= 0.0))
            throw BoundsError("detection model needs lambda_bright > lambda_dark >= 0");
        if (threshold_pass < 0 || threshold_discriminate < 0) throw BoundsError("thresholds must be >= 0");
    }

    /// P(N <= threshold | mean lambda).
    static double poisson_cdf(int threshold, double lambda) {
        if (std::isinf(lambda)) return 0.0;
        double term = std::exp(-lambda), sum = term;
        for (int k = 1; k <= threshold; ++k) {
            term *= lambda / k;
            sum += term;
        }
        return std::min(1.0, sum);
    }

    double p_pass(Spin s) const { return poisson_cdf(threshold_pass, s == Spin::up ? lambda_bright : lambda_dark); }
    double p_dark(Spin s) const {
        return poisson_cdf(threshold_discriminate, s == Spin::up ? lambda_bright : lambda_dark);
    }
};

namespace detail {

/// Projects the given ion onto spin s; returns (probability, unnormalized state data).
inline double project_spin(const SpinMotionState& state, int ion, Spin s, Vector* v_out, Operator* rho_out) {
    const HilbertSpace& sp = state.space();
    const std::size_t md = sp.motional_dimension();
    const bool want_up = s == Spin::up;
    if (state.is_pure()) {
        Vector v = state.amplitudes();
        for (std::size_t i = 0; i < sp.dimension(); ++i)
            if (sp.spin_up(i / md, ion) != want_up) v[static_cast<Eigen::Index>(i)] = 0.0;
        const double p = v.squaredNorm();
        if (v_out) *v_out = std::move(v);
        return p;
    }
    Operator rho = state.density_matrix();
    for (std::size_t i = 0; i < sp.dimension(); ++i) {
        if (sp.spin_up(i / md, ion) == want_up) continue;
        rho.row(static_cast<Eigen::Index>(i)).setZero();
        rho.col(static_cast<Eigen::Index>(i)).setZero();
    }
    const double p = rho.trace().real();
    if (rho_out) *rho_out = std::move(rho);
    return p;
}

} // namespace detail

/// Conditions the state on a spin outcome of one ion and renormalizes.
inline SpinMotionState condition_on_spin(const SpinMotionState& state, int ion, Spin s) {
    Vector v;
    Operator rho;
    const double p = detail::project_spin(state, ion, s, &v, &rho);
    if (p < numerical_floor) {
        std::ostringstream os;
        os << "conditioning on a branch of probability " << p << " (below " << numerical_floor << ")";
        throw NumericalFloorError(os.str());
    }
    if (state.is_pure()) return SpinMotionState::assume_valid(state.space(), Vector(v / std::sqrt(p)));
    return SpinMotionState::assume_valid(state.space(), Operator(rho / p));
}

struct Detection {
    Spin spin = Spin::down;
    int photons = 0;
    SpinMotionState state; // conditioned on the projected spin
};

/// Projective measurement of one ion followed by a Poisson photon count for the projected spin.
inline Detection detect_spin(const SpinMotionState& state, const DetectionModel& model, RandomStream& rng, int ion = 0) {
    const double p_up = std::clamp(probability_up(state, ion), 0.0, 1.0);
    const Spin s = rng.uniform() < p_up ? Spin::up : Spin::down;
    const int n = sample_poisson(rng, s == Spin::up ? model.lambda_bright : model.lambda_dark);
    return Detection{s, n, condition_on_spin(state, ion, s)};
}

/// Optical pumping of one ion back to down; the motional state is untouched.
inline SpinMotionState repump(const SpinMotionState& state, int ion, Spin current) {
    if (current == Spin::down) return state;
    Spin2 flip;
    flip << 0.0, 1.0, 1.0, 0.0;
    return apply_spin_unitary(state, flip, ion);
}

struct FilterStepResult {
    int photons = 0;
    bool pass = false;    // event A
    bool outcome = false; // event B (dark)
    Spin spin = Spin::down;
    SpinMotionState state; // conditioned on the measured spin, re-pumped to down
};

inline FilterStepResult run_filter_step(const SpinMotionState& state, const FilterStep& step,
                                        const RamseySimulator& sim, const DetectionModel& model, RandomStream& rng,
                                        const RamseySpec* physical = nullptr) {
    if (step.keep != Spin::down) throw BoundsError("filter steps keep the dark (down) outcome");
    RamseySpec spec = physical ? *physical : ideal_spec(step.theta, step.phi);
    spec.phi = step.phi;
    const SpinMotionState after = sim.run(state, spec);
    Detection d = detect_spin(after, model, rng, sim.system().ion);
    FilterStepResult r{d.photons, d.photons <= model.threshold_pass, d.photons <= model.threshold_discriminate, d.spin,
                       repump(d.state, sim.system().ion, d.spin)};
    return r;
}

// ---------------------------------------------------------------------------
// Ledger and estimator

struct StepCounts {
    std::int64_t a = 0;               // A_l
    std::int64_t b = 0;               // B_l
    std::int64_t chain = 0;           // A_0 ... A_{l-1} all passed
    std::int64_t b_given_chain = 0;   // B_l within the chain
};

struct EventLedger {
    std::int64_t shots = 0;
    std::vector<StepCounts> steps;
    std::uint64_t seed = 0;

    explicit EventLedger(std::size_t n_steps = 0) : steps(n_steps) {}

    void merge(const EventLedger& other) {
        if (other.steps.size() != steps.size()) throw BoundsError("cannot merge ledgers with different step counts");
        shots += other.shots;
        for (std::size_t l = 0; l < steps.size(); ++l) {
            steps[l].a += other.steps[l].a;
            steps[l].b += other.steps[l].b;
            steps[l].chain += other.steps[l].chain;
            steps[l].b_given_chain += other.steps[l].b_given_chain;
        }
    }

    /// Records one shot's per-step (A, B) flags.
    void record(const std::vector<std::pair<bool, bool>>& events) {
        if (events.size() != steps.size()) throw BoundsError("event count does not match the ledger");
        ++shots;
        bool chain = true;
        for (std::size_t l = 0; l < steps.size(); ++l) {
            const auto [a, b] = events[l];
            if (a && !b) throw BoundsError("event A without event B violates threshold ordering");
            steps[l].a += a;
            steps[l].b += b;
            if (chain) {
                ++steps[l].chain;
                steps[l].b_given_chain += b;
            }
            chain = chain && a;
        }
    }
};

struct PopulationEstimate {
    double estimate = 0.0;
    double sigma = 0.0;
    std::vector<double> factors;
    bool degenerate = false;
    int degenerate_step = -1;
};

/// p ~ P(B_0) prod_l P(B_l | A_0 ... A_{l-1}); factor errors binomial, combined in quadrature.
inline PopulationEstimate estimate_population(const EventLedger& ledger) {
    if (ledger.shots < 1) throw BoundsError("ledger has no shots");
    PopulationEstimate e;
    std::vector<double> sig;
    for (std::size_t l = 0; l < ledger.steps.size(); ++l) {
        const auto& c = ledger.steps[l];
        if (c.chain == 0) {
            e.degenerate = true;
            e.degenerate_step = static_cast<int>(l);
            e.estimate = 0.0;
            e.sigma = 0.0;
            e.factors.push_back(0.0);
            return e;
        }
        const double f = static_cast<double>(c.b_given_chain) / static_cast<double>(c.chain);
        e.factors.push_back(f);
        sig.push_back(std::sqrt(f * (1.0 - f) / static_cast<double>(c.chain)));
    }
    e.estimate = 1.0;
    for (double f : e.factors) e.estimate *= f;
    double var = 0.0;
    for (std::size_t i = 0; i < e.factors.size(); ++i) {
        double others = 1.0;
        for (std::size_t k = 0; k < e.factors.size(); ++k)
            if (k != i) others *= e.factors[k];
        var += others * others * sig[i] * sig[i];
    }
    e.sigma = std::sqrt(var);
    return e;
}

/// Monte Carlo over shots; shot s draws from stream (seed, s), so the ledger does not depend on thread count.
inline EventLedger single_shot_measure(const SpinMotionState& initial, const FilterPlan& plan, std::int64_t shots,
                                       const DetectionModel& model, std::uint64_t seed, const RamseySimulator& sim,
                                       unsigned threads = 1) {
    if (shots < 1) throw BoundsError("shots must be >= 1");
    model.validate();
    const std::size_t n_steps = plan.steps.size();
    auto worker = [&](std::int64_t begin, std::int64_t end, EventLedger& out) {
        // propagator caches are per simulator; give each worker its own copy
        RamseySimulator local = sim;
        std::vector<std::pair<bool, bool>> ev(n_steps);
        for (std::int64_t s = begin; s < end; ++s) {
            RandomStream rng(seed, static_cast<std::uint64_t>(s));
            SpinMotionState st = initial;
            for (std::size_t l = 0; l < n_steps; ++l) {
                auto r = run_filter_step(st, plan.steps[l], local, model, rng);
                ev[l] = {r.pass, r.outcome};
                st = std::move(r.state);
            }
            out.record(ev);
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(shots)));
    std::vector<EventLedger> parts(threads, EventLedger(n_steps));
    if (threads == 1) {
        worker(0, shots, parts[0]);
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < threads; ++k) {
            const std::int64_t b = shots * k / threads, e = shots * (k + 1) / threads;
            pool.emplace_back(worker, b, e, std::ref(parts[k]));
        }
        for (auto& t : pool) t.join();
    }
    EventLedger total(n_steps);
    total.seed = seed;
    for (const auto& p : parts) total.merge(p);
    return total;
}

/// Closed-form diagonal of the single-shot grid for a prepared Fock target under an exact plan:
/// every step sees a down spin, so the estimate is (P(B | down))^m.
inline double closed_form_diagonal(const DetectionModel& model, int steps) {
    return std::pow(model.p_dark(Spin::down), steps);
}

} // namespace dispfock
