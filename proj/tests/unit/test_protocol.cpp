#include <gtest/gtest.h>

#include <cmath>

#include "dispfock/measurement.hpp"
#include "dispfock/protocol.hpp"

using namespace dispfock;

namespace {

const ModeSpec axial{two_pi * 940e3, 0.10};
const double rabi = two_pi * 100e3;

DecouplingDrive single_drive(double omega_rabi = rabi) {
    return drive_from_sideband_detunings({axial}, omega_rabi, 0, two_pi * 110e3, 0, -two_pi * 110e3);
}

double pup_linear_reference(const FockDistribution& d, const std::vector<double>& theta, double phi) {
    double s = 0.0;
    for (const auto& [n, p] : d.entries()) s += p * std::cos(theta[0] * n[0] - phi);
    return 0.5 * (1.0 - s);
}

bool close(const Spin2& a, const Spin2& b, double tol = 1e-12) { return (a - b).norm() < tol; }

} // namespace

TEST(SpinRotation, Identities) {
    const Spin2 ry = rotation(Axis::y, pi);
    Eigen::Vector2cd down(1.0, 0.0);
    const Eigen::Vector2cd out = ry * down;
    EXPECT_NEAR(std::abs(out[1]), 1.0, 1e-12);
    EXPECT_TRUE(close(rotation(Axis::x, pi / 2) * rotation(Axis::x, pi / 2), rotation(Axis::x, pi)));
    EXPECT_TRUE(close(rotation_phi(0.0, 0.7), rotation(Axis::x, 0.7)));
    EXPECT_TRUE(close(rotation_phi(pi / 2, 0.7), rotation(Axis::y, 0.7)));
    const auto sp = make_space({3}, 2);
    const Operator u = spin_rotation(sp, Axis::y, 0.4, 1);
    EXPECT_LT((u.adjoint() * u - Operator::Identity(u.rows(), u.cols())).norm(), 1e-12);
}

TEST(Sdr, PhasesAndParity) {
    const auto sp = make_space({3, 3}, 1);
    EXPECT_LT((sdr_unitary(sp, {0.0, 0.0}) - Operator::Identity(18, 18)).norm(), 1e-15);
    const Vector d = sdr_diagonal(sp, {pi, 0.0});
    EXPECT_LT(std::abs(d[static_cast<Eigen::Index>(sp.index(1, Occupation{1, 0}))] - cplx(0.0, -1.0)), 1e-12);
    const Vector p = sdr_diagonal(sp, {pi, pi});
    for (std::size_t m = 0; m < sp.motional_dimension(); ++m) {
        const auto& n = sp.occupation(m);
        const cplx ratio = p[static_cast<Eigen::Index>(sp.index(1, n))] / p[static_cast<Eigen::Index>(sp.index(0, n))];
        EXPECT_LT(std::abs(ratio - ((n[0] + n[1]) % 2 ? -1.0 : 1.0)), 1e-12);
    }
}

TEST(Scheduling, SingleModeTable) {
    const auto drive = single_drive();
    EXPECT_NEAR(drive.duration_ratio(), 1050.0 / 830.0, 1e-12);
    const auto spec = schedule_selective_decoupling({axial}, {pi}, drive);
    EXPECT_NEAR(std::abs(spec.chi_eff[0]) / two_pi, 227.3, 0.05);
    EXPECT_NEAR(spec.total_time(), pi / (2.0 * std::abs(spec.chi_eff[0])), 1e-15);
    EXPECT_NEAR(spec.total_time(), 1.100e-3, 1e-6);
    EXPECT_NEAR(spec.step1.duration / spec.step2.duration, 1050.0 / 830.0, 1e-12);
    EXPECT_NEAR(spec.theta[0], pi, 1e-12);
    EXPECT_NEAR(spec.phi_off, pi / 2, 1e-12);
}

TEST(Scheduling, StarkPhaseCancels) {
    const std::vector<ModeSpec> modes{axial, {two_pi * 1.6e6, 0.087}};
    for (double ratio : {0.5, 1.0, 2.0}) {
        const auto drive = search_ratio_detunings(modes, two_pi * 60e3, ratio);
        const auto s = step_chi(modes, drive);
        EXPECT_NEAR(s.chi_eff[0] / s.chi_eff[1], ratio, 1e-6);
        for (double t : {1e-4, 1e-3, 7e-3}) {
            const auto spec = schedule_for_time(modes, drive, t);
            EXPECT_LT(std::abs(stark_phase(spec)), 1e-9);
        }
    }
}

TEST(Scheduling, Errors) {
    auto d = single_drive();
    d.carrier_detuning2 = -d.carrier_detuning2;
    EXPECT_THROW(schedule_selective_decoupling({axial}, {pi}, d), SchedulingError);
    EXPECT_THROW(schedule_selective_decoupling({axial}, {-pi}, single_drive()), SchedulingError);

    const std::vector<ModeSpec> modes{axial, {two_pi * 1.6e6, 0.087}};
    const auto drive = search_ratio_detunings(modes, two_pi * 60e3, 1.0);
    try {
        schedule_selective_decoupling(modes, {pi, pi / 3}, drive);
        FAIL() << "expected SchedulingError";
    } catch (const SchedulingError& e) {
        EXPECT_NE(std::string(e.what()).find("unreachable"), std::string::npos);
    }
    EXPECT_THROW(search_ratio_detunings(modes, two_pi * 60e3, 1e6), SchedulingError);
}

TEST(Ramsey, IdealSignals) {
    const auto sp = make_space({13}, 1);
    RamseySimulator sim(sp, SystemModel{{}, Engine::ideal});
    for (double th : {0.3, 1.7, pi, 5.0}) EXPECT_NEAR(sim.p_up(fock_state(sp, {0}), ideal_spec({th}, 0.0)), 0.0, 1e-6);
    EXPECT_NEAR(sim.p_up(fock_state(sp, {1}), ideal_spec({pi}, 0.0)), 1.0, 1e-6);
    EXPECT_NEAR(sim.p_up(coherent_state(sp, {1.0}), ideal_spec({pi}, 0.0)), 0.5 * (1.0 - std::exp(-2.0)), 1e-6);
    EXPECT_NEAR(0.5 * (1.0 - std::exp(-2.0)), 0.43233, 1e-5);
}

TEST(Ramsey, EnginesAgreeInLinearModel) {
    const auto sp = make_space({13}, 1);
    const auto drive = single_drive();
    const SystemModel eff{{axial}, Engine::effective};
    RamseySimulator ideal(sp, SystemModel{{axial}, Engine::ideal}), effective(sp, eff);
    const auto psi = coherent_state(sp, {1.2});
    for (double t : {0.2e-3, 1.1e-3, 2.3e-3}) {
        const auto spec = schedule_for_time(eff.modes, drive, t, 0.4);
        const double linear = pup_linear_reference(fock_populations(psi), spec.theta, spec.phi);
        EXPECT_NEAR(ideal.p_up(psi, spec), linear, 1e-9);
        EXPECT_NEAR(effective.p_up(psi, spec), linear, 1e-9);
    }
}

TEST(ParityFilter, CoherentPassProbability) {
    const auto step = parity_filter_plan(1, {0}, Parity::even);
    const auto sp = make_space({20}, 1);
    const auto psi = coherent_state(sp, {1.5});
    double pass = 0.0;
    const auto pops = fock_populations(psi);
    for (const auto& [n, p] : pops.entries()) pass += p * filter_pass_probability(step, n);
    EXPECT_NEAR(pass, 0.5 * (1.0 + std::exp(-4.5)), 1e-9);
    EXPECT_NEAR(pass, 0.50555, 1e-5);
    EXPECT_DOUBLE_EQ(filter_pass_probability(step, {3}), 0.0);

    RamseySimulator sim(sp, SystemModel{{}, Engine::ideal});
    const auto out = condition_on_spin(sim.run(psi, ideal_spec(step.theta, step.phi)), 0, Spin::down);
    const int mask[] = {0};
    EXPECT_NEAR(parity_expectation(out, mask), 1.0, 1e-9);
    const auto odd = parity_filter_plan(1, {0}, Parity::odd);
    const auto out_odd = condition_on_spin(sim.run(psi, ideal_spec(odd.theta, odd.phi)), 0, Spin::down);
    EXPECT_NEAR(parity_expectation(out_odd, mask), -1.0, 1e-9);
}

TEST(BinaryFilter, Phases) {
    auto phases = [](int target, PhaseMode m) {
        std::vector<double> p;
        for (const auto& s : binary_filter_plan(target, 0, 3, m).steps) p.push_back(s.phi);
        return p;
    };
    const auto exact = phases(5, PhaseMode::exact);
    EXPECT_NEAR(exact[0], pi, 1e-12);
    EXPECT_NEAR(exact[1], pi / 2, 1e-12);
    EXPECT_NEAR(exact[2], 5 * pi / 4, 1e-12);
    const auto coarse = phases(5, PhaseMode::paper);
    EXPECT_NEAR(coarse[0], pi, 1e-12);
    EXPECT_NEAR(coarse[1], 0.0, 1e-12);
    EXPECT_NEAR(coarse[2], pi, 1e-12);
    for (auto m : {PhaseMode::exact, PhaseMode::paper}) {
        const auto f = phases(4, m);
        EXPECT_NEAR(f[0], 0.0, 1e-12);
        EXPECT_NEAR(f[1], 0.0, 1e-12);
        EXPECT_NEAR(f[2], pi, 1e-12);
    }
    EXPECT_THROW(binary_filter_plan(8, 0, 3), BitsError);
    const auto plan = binary_filter_plan(5, 0, 3);
    EXPECT_NEAR(plan.steps[2].theta[0], pi / 4, 1e-15);
}

TEST(BinaryFilter, ExactPlanIsAProjector) {
    // in exact mode the chain of deterministic pass probabilities is a Kronecker delta on n < 2^m
    for (int target = 0; target < 8; ++target) {
        const auto plan = binary_filter_plan(target, 0, 3);
        for (int n = 0; n < 8; ++n) {
            double p = 1.0;
            for (const auto& s : plan.steps) p *= filter_pass_probability(s, {n});
            EXPECT_NEAR(p, n == target ? 1.0 : 0.0, 1e-12) << target << " " << n;
        }
    }
}

TEST(ParallelFilter, RoundCounts) {
    EXPECT_EQ(parallel_filter_plan({5, 3}, 2).size(), 3u);
    EXPECT_EQ(parallel_filter_plan({5, 3}, 1).size(), 5u);
    EXPECT_EQ(parallel_filter_plan({5}, 3).size(), 1u);
    for (const auto& r : parallel_filter_plan({5, 3}, 2)) {
        std::vector<int> ions;
        for (const auto& c : r.conditions) ions.push_back(c.ion);
        std::sort(ions.begin(), ions.end());
        EXPECT_TRUE(std::unique(ions.begin(), ions.end()) == ions.end());
    }
}

TEST(Calibration, OffsetRecoversResidual) {
    const auto sp = make_space({3}, 1);
    SystemModel sys{{axial}, Engine::effective};
    sys.residual_shift = two_pi * 50.0;
    const auto cal = calibrate_offset(sp, sys, single_drive());
    EXPECT_NEAR(cal.residual, sys.residual_shift, two_pi * 1.0);
    EXPECT_LT(cal.post_check_p_up, 1e-3);

    sys.residual_shift = 0.0;
    EXPECT_NEAR(calibrate_offset(sp, sys, single_drive()).residual, 0.0, two_pi * 0.01);
    EXPECT_THROW(calibrate_offset(sp, sys, single_drive(), -1.0), CalibrationError);
}

TEST(Calibration, TpiSingleMode) {
    const auto sp = make_space({6}, 1);
    const SystemModel sys{{axial}, Engine::effective};
    const auto cal = calibrate_tpi(sp, sys, single_drive());
    EXPECT_NEAR(cal.t_pi / cal.t_design, 1.0, 0.01);
    RamseySimulator sim(sp, sys);
    EXPECT_LT(sim.p_up(fock_state(sp, {2}), schedule_for_time(sys.modes, single_drive(), cal.t_pi)), 1e-6);

    const auto strong = calibrate_tpi(sp, sys, single_drive(rabi * std::sqrt(2.0)));
    EXPECT_NEAR(strong.t_pi / cal.t_pi, 0.5, 0.005);
}
