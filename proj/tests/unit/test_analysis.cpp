#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dispfock/analysis.hpp"

using namespace dispfock;

namespace {

FockDistribution dist(std::initializer_list<std::pair<const Occupation, double>> l) {
    return FockDistribution(std::map<Occupation, double>(l));
}

const ModeSpec axial{two_pi * 940e3, 0.10};

FockDistribution renormalized(const FockDistribution& d) {
    std::map<Occupation, double> e;
    for (const auto& [n, p] : d.entries()) e[n] = p / d.total();
    return FockDistribution(e);
}

RamseyDataset exact_dataset(const FitModelParams& p, const std::vector<double>& times, double chi_design) {
    RamseyDataset d;
    d.times = times;
    d.p_up = pup_model_full(p, {}, times);
    d.ratio_label = p.ratio;
    d.chi_eff_design = chi_design;
    return d;
}

FitResult fit_from(const FockDistribution& d) {
    FitResult f;
    for (const auto& [n, p] : d.entries()) f.basis.push_back(n);
    f.populations = d;
    f.population_sum = d.total();
    return f;
}

} // namespace

TEST(PupModel, LinearExamples) {
    EXPECT_DOUBLE_EQ(pup_model_linear(dist({{{0}, 1.0}}), {2.3}), 0.0);
    EXPECT_NEAR(pup_model_linear(dist({{{1}, 1.0}}), {pi}), 1.0, 1e-15);
    EXPECT_NEAR(pup_model_linear(coherent_distribution({1.0}, 40), {pi}), 0.43233, 1e-5);
}

TEST(PupModel, FullModelReductions) {
    const auto times = linspace(0.0, 4e-3, 23);
    for (int n : {1, 3}) {
        FitModelParams p{15.0, -two_pi * 174.0, 0.0, NAN, dist({{{n}, 1.0}})};
        const auto v = pup_model_full(p, {}, times);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double t = times[i];
            EXPECT_NEAR(v[i], 0.5 * (1.0 - std::exp(-15.0 * (2 * n + 1) * t) * std::cos(2.0 * n * p.chi_eff_1 * t)), 1e-14);
        }
    }
    FitModelParams fast{1e9, two_pi * 200.0, 0.0, NAN, cat_distribution(1.5, +1, 6)};
    EXPECT_NEAR(pup_model_full(fast, {}, {1e-3})[0], 0.5 * fast.populations.total(), 1e-12);
    // two-mode phase with ratio r: theta_2 = theta_1 / r
    FitModelParams two{0.0, two_pi * 100.0, 0.0, 2.0, dist({{{1, 1}, 1.0}})};
    const double t = 1.7e-3;
    const double theta1 = 2.0 * two.chi_eff_1 * t;
    EXPECT_NEAR(pup_model_full(two, {}, {t})[0], pup_model_linear(two.populations, {theta1, theta1 / 2.0}), 1e-12);
}

TEST(PupModel, NonlinearCatStaysBrightAtTwoPi) {
    const auto cat = cat_distribution(1.5, +1, 14);
    const double chi = two_pi * 227.0;
    const double t = pi / chi; // theta = 2 chi t = 2 pi
    FitModelParams p{0.0, chi, 0.0, NAN, cat};
    FitSetting nl;
    nl.nonlinear_modes = std::vector<ModeSpec>{axial};
    EXPECT_NEAR(pup_model_full(p, {}, {t})[0], 0.0, 1e-12);
    EXPECT_GT(pup_model_full(p, nl, {t})[0], 1e-3);
}

TEST(SingleFockFit, NoiselessExact) {
    const auto times = linspace(0.0, 5e-3, 61);
    RamseyDataset d;
    d.times = times;
    for (double t : times) d.p_up.push_back(0.5 * (1.0 - std::exp(-15.0 * t) * std::cos(2.0 * -two_pi * 174.0 * t + 0.3)));
    const auto f = fit_single_fock(d, -1);
    EXPECT_NEAR(f.gamma / 15.0, 1.0, 1e-6);
    EXPECT_NEAR(f.chi / (-two_pi * 174.0), 1.0, 1e-6);
    EXPECT_NEAR(f.phase, 0.3, 1e-6);
}

TEST(SingleFockFit, ProjectionNoise) {
    const auto times = linspace(0.0, 5e-3, 61);
    std::vector<double> p;
    for (double t : times) p.push_back(0.5 * (1.0 - std::exp(-15.0 * t) * std::cos(2.0 * -two_pi * 174.0 * t)));
    const auto f = fit_single_fock(sample_dataset(times, p, 300, 17), -1);
    EXPECT_NEAR(f.gamma, 15.0, 4.0);
    EXPECT_NEAR(f.chi / two_pi, -174.0, 2.0);
    EXPECT_LT(f.gamma_sigma, 8.0);
    EXPECT_LT(f.chi_sigma / two_pi, 4.0);
}

TEST(SingleFockFit, VacuumAndFlatTraces) {
    RamseyDataset flat;
    flat.times = linspace(0.0, 1e-3, 20);
    flat.p_up.assign(20, 0.0);
    const auto v = fit_single_fock(flat, 1, true);
    EXPECT_TRUE(v.vacuum);
    EXPECT_EQ(v.chi, 0.0);
    EXPECT_THROW(fit_single_fock(flat, 1), DegenerateFitError);
}

TEST(PopulationFit, NoiselessSingleModeRecovery) {
    const auto truth = renormalized(cat_distribution(1.5, +1, 6));
    const double chi = two_pi * 227.0;
    const auto times = linspace(0.0, pi / chi, 61);
    const auto d = exact_dataset({12.0, chi, two_pi * 3.0, NAN, truth}, times, chi);
    FitOptions opt;
    opt.n_max = 6;
    const auto f = fit_populations({d}, opt);
    for (const auto& [n, p] : truth.entries()) EXPECT_NEAR(f.populations.probability(n), p, 1e-4) << n[0];
    EXPECT_NEAR(f.datasets[0].gamma_1, 12.0, 1e-2);
    EXPECT_NEAR(f.datasets[0].chi_res / two_pi, 3.0, 1e-3);
    EXPECT_NEAR(parity_from_populations(f, {0}).value, 1.0, 1e-4);
    EXPECT_FALSE(f.degenerate);
}

TEST(PopulationFit, NoiselessEcsThreeRatios) {
    const auto truth = renormalized(ecs_distribution(1.0, +1, 4));
    const double chis[] = {two_pi * 125.0, two_pi * 233.0, two_pi * 226.0};
    const double ratios[] = {0.5, 1.0, 2.0};
    std::vector<RamseyDataset> sets;
    for (int k = 0; k < 3; ++k) {
        const auto times = linspace(0.0, 2.0 * pi / chis[k], 81);
        sets.push_back(exact_dataset({12.0, chis[k], 0.0, ratios[k], truth}, times, chis[k]));
    }
    FitOptions opt;
    opt.n_max = 4;
    opt.mode_count = 2;
    const auto f = fit_populations(sets, opt);
    for (const auto& [n, p] : truth.entries()) EXPECT_NEAR(f.populations.probability(n), p, 1e-3) << n[0] << "," << n[1];
    EXPECT_NEAR(parity_from_populations(f, {0, 1}).value, 1.0, 1e-3);
}

TEST(PopulationFit, RatioOneOnlyIsDegenerate) {
    const auto truth = renormalized(ecs_distribution(1.0, +1, 4));
    const double chi = two_pi * 233.0;
    const auto d = exact_dataset({12.0, chi, 0.0, 1.0, truth}, linspace(0.0, 2.0 * pi / chi, 81), chi);
    FitOptions opt;
    opt.n_max = 4;
    opt.mode_count = 2;
    WarningCapture w;
    const auto f = fit_populations({d}, opt);
    EXPECT_TRUE(f.degenerate);
    EXPECT_FALSE(w.messages().empty());
    bool pair = false;
    for (const auto& g : f.degenerate_groups) {
        int total = g.front()[0] + g.front()[1];
        for (const auto& n : g) EXPECT_EQ(n[0] + n[1], total);
        pair = pair || (g.size() == 2 && total == 1);
    }
    EXPECT_TRUE(pair);
    EXPECT_EQ(f.degenerate_groups.size(), 7u); // sums 1..7 on a 5x5 grid
}

TEST(PopulationFit, InputErrors) {
    EXPECT_THROW(fit_populations({}), FitError);
    RamseyDataset d;
    d.times = {0.0, 1.0};
    d.p_up = {0.0, 0.1};
    EXPECT_THROW(fit_populations({d}), FitError);
    FitOptions two;
    two.mode_count = 2;
    d.times = linspace(0.0, 1e-3, 100);
    d.p_up.assign(100, 0.1);
    EXPECT_THROW(fit_populations({d}, two), FitError);
}

TEST(Parity, IdealDistributions) {
    EXPECT_NEAR(parity_from_populations(fit_from(cat_distribution(1.5, +1, 6)), {0}).value, 1.0, 1e-12);
    EXPECT_NEAR(parity_from_populations(fit_from(ecs_distribution(1.0, -1, 4)), {0, 1}).value, -1.0, 1e-12);
    EXPECT_NEAR(normalized_parity(cat_distribution(1.5, -1, 6), {0}), -1.0, 1e-12);
}

TEST(Linearity, ExactSlopes) {
    std::vector<std::pair<Occupation, double>> pts;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 3; ++b) pts.push_back({{a, b}, 3.5 * a - 1.25 * b});
    const auto r = linearity_regression(pts);
    EXPECT_NEAR(r.chi_eff[0], 3.5, 1e-12);
    EXPECT_NEAR(r.chi_eff[1], -1.25, 1e-12);
    EXPECT_NEAR(r.rss, 0.0, 1e-20);
}

TEST(Linearity, Errors) {
    EXPECT_THROW(linearity_regression({}), RegressionError);
    EXPECT_THROW(linearity_regression({{{1, 0}, 1.0}, {{2, 0}, 2.0}}), RegressionError);
    EXPECT_THROW(linearity_regression({{{1, 1}, 1.0}, {{2, 2}, 2.0}}), RegressionError);
}

TEST(SpinStrings, Examples) {
    const FockDistribution one_zero({{{1, 0}, 1.0}});
    const auto p = spin_string_probabilities(one_zero, {{pi, 0.0}, {pi, 0.0}});
    EXPECT_NEAR(p.at("uu"), 1.0, 1e-15);
    EXPECT_NEAR(p.at("dd"), 0.0, 1e-15);
    EXPECT_EQ(spin_string_label(2, 2), "ud");
}

TEST(SpinStrings, SumToOneAndReduceToSingleIon) {
    std::mt19937 gen(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::map<Occupation, double> e;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) e[{a, b}] = u(gen);
        const FockDistribution d(e);
        const int ions = 1 + trial % 4;
        std::vector<std::vector<double>> th;
        std::vector<double> ph;
        for (int i = 0; i < ions; ++i) {
            th.push_back({6.0 * u(gen), 6.0 * u(gen)});
            ph.push_back(6.0 * u(gen));
        }
        double s = 0.0;
        for (const auto& [k, v] : spin_string_probabilities(d, th, ph)) s += v;
        EXPECT_NEAR(s, 1.0, 1e-12);
        const auto single = spin_string_probabilities(d, {th[0]});
        EXPECT_NEAR(single.at("u"), pup_model_linear(renormalized(d), th[0]), 1e-12);
    }
}

TEST(Datasets, SamplingIsSeeded) {
    const auto times = linspace(0.0, 1.0, 30);
    const std::vector<double> p(30, 0.3);
    const auto a = sample_dataset(times, p, 300, 5), b = sample_dataset(times, p, 300, 5), c = sample_dataset(times, p, 300, 6);
    EXPECT_EQ(a.p_up, b.p_up);
    EXPECT_NE(a.p_up, c.p_up);
    RamseyDataset bad;
    bad.times = {0.0, 0.0};
    bad.p_up = {0.1, 0.2};
    EXPECT_THROW(bad.validate(), BoundsError);
}
