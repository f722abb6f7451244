#include <doctest.h>

#include <cmath>
#include <vector>

#include "svperturb/montecarlo.hpp"
#include "svperturb/rng.hpp"

using namespace svp;
using namespace svp::mc;

namespace {

Vector vec(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) {
        v(i++) = x;
    }
    return v;
}

NoiseScenario base_scenario() {
    NoiseScenario sc;
    sc.n = 40;
    sc.k = 2;
    sc.spectrum = vec({2.0, 1.0});
    sc.eps = 1e-3;
    sc.gamma = 1.0;
    sc.beta = 0.45;
    sc.basis_seed = 1;
    sc.noise_seed = 5000;
    sc.trials = 1;
    return sc;
}

}  // namespace

TEST_CASE("scenario validation names the offending field") {
    NoiseScenario sc = base_scenario();
    sc.beta = 0.7;
    CHECK_THROWS_WITH_AS(sc.validate(), "beta: must lie in (0, 0.5)", ConfigError);
    sc = base_scenario();
    sc.spectrum = vec({1.0, 2.0});
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc = base_scenario();
    sc.trials = 0;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
}

TEST_CASE("eps = 0 trial is exactly covered with identity rotation") {
    NoiseScenario sc = base_scenario();
    sc.eps = 0.0;
    const auto record = run_trial(sc, 0);
    CHECK(record.resid_max == 0.0);
    CHECK(record.covered);
    CHECK(record.gauss_term_max == 0.0);
    CHECK(record.weyl_max_gap < 1e-12);
}

TEST_CASE("trials are deterministic and order-insensitive under parallel runs") {
    NoiseScenario sc = base_scenario();
    sc.trials = 8;
    const auto once = run_scenario(sc, 1);
    const auto again = run_scenario(sc, 1);
    const auto parallel = run_scenario(sc, 4);
    REQUIRE(once.size() == 8);
    for (int i = 0; i < 8; ++i) {
        CAPTURE(i);
        CHECK(once[i].resid_max == again[i].resid_max);
        CHECK(once[i].resid_max == parallel[i].resid_max);
        CHECK(once[i].rotation_objective == parallel[i].rotation_objective);
        CHECK(once[i].trial_index == i);
    }
    CHECK(trials_csv(once) == trials_csv(parallel));
}

TEST_CASE("run_trial honours both noise conventions") {
    NoiseScenario sc = base_scenario();
    sc.convention = NoiseConvention::kProblemStatement;
    CHECK(sc.theorem_eps() == doctest::Approx(1e-3 * std::sqrt(40.0)).epsilon(1e-12));
    sc.convention = NoiseConvention::kUnitOverN;
    CHECK(sc.theorem_eps() == 1e-3);
}

TEST_CASE("median residual drops two decades per eps decade") {
    NoiseScenario sc = base_scenario();
    sc.trials = 200;
    std::vector<double> medians;
    for (double eps : {1e-2, 1e-3}) {
        sc.eps = eps;
        auto records = run_scenario(sc, 4);
        std::vector<double> resid;
        resid.reserve(records.size());
        for (const auto& r : records) {
            resid.push_back(r.resid_max);
        }
        std::nth_element(resid.begin(), resid.begin() + resid.size() / 2, resid.end());
        medians.push_back(resid[resid.size() / 2]);
    }
    const double slope = std::log(medians[0] / medians[1]) / std::log(10.0);
    CHECK(slope > 1.7);
    CHECK(slope < 2.3);
}

TEST_CASE("weyl gaps in trials stay below the noise norm") {
    NoiseScenario sc = base_scenario();
    sc.eps = 0.05;
    sc.trials = 20;
    for (const auto& record : run_scenario(sc, 2)) {
        CAPTURE(record.trial_index);
        CHECK(record.weyl_max_gap <= record.noise_norm + 1e-12);
    }
}

TEST_CASE("gaussian term dominates the residual and grows as eps shrinks") {
    // Dominance condition holds here: eps << min{n^-beta, 1/(u1_max sqrt(n))}.
    NoiseScenario sc = base_scenario();
    sc.trials = 100;
    std::vector<double> ratios;
    for (double eps : {1e-2, 1e-3}) {
        sc.eps = eps;
        std::vector<double> gauss, resid;
        for (const auto& r : run_scenario(sc, 4)) {
            gauss.push_back(r.gauss_term_max);
            resid.push_back(r.resid_max);
        }
        auto med = [](std::vector<double> v) {
            std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
            return v[v.size() / 2];
        };
        ratios.push_back(med(gauss) / med(resid));
    }
    CHECK(ratios[0] > 1.0);
    CHECK(ratios[1] > ratios[0]);
}

TEST_CASE("rotated noise keeps the 1/n entry variance") {
    NoiseScenario sc = base_scenario();
    sc.n = 20;
    const auto split = scenario_split(sc);
    double sum = 0.0;
    double sum_sq = 0.0;
    const int draws = 200;
    for (int d = 0; d < draws; ++d) {
        const auto c = spectral::rotate_noise(split, svp::sample_noise(sc.n, 3000 + d));
        const Matrix full = spectral::assemble_blocks(c);
        sum += full.sum();
        sum_sq += full.squaredNorm();
    }
    const double count = static_cast<double>(draws) * sc.n * sc.n;
    const double mean = sum / count;
    const double variance = sum_sq / count - mean * mean;
    CHECK(variance == doctest::Approx(1.0 / sc.n).epsilon(0.05));
}

TEST_CASE("coverage report verdicts") {
    std::vector<TrialRecord> records(10);
    for (auto& r : records) {
        r.covered = true;
    }
    const auto all = coverage_report(records, 0.9);
    CHECK(all.coverage == 1.0);
    CHECK(all.verdict == CoverageVerdict::kPass);

    const auto vacuous = coverage_report(records, -3.0);
    CHECK(vacuous.verdict == CoverageVerdict::kSkippedVacuous);

    records[0].covered = false;
    records[1].covered = false;
    records[2].covered = false;
    const auto fail = coverage_report(records, 0.999);
    CHECK(fail.verdict == CoverageVerdict::kFail);

    CHECK_THROWS_AS(coverage_report({}, 0.5), InsufficientSamples);
}

TEST_CASE("coverage at a desk-scale scenario clears the floor") {
    NoiseScenario sc = base_scenario();
    sc.n = 60;
    sc.trials = 50;
    sc.noise_seed = 700;
    const auto split = scenario_split(sc);
    const auto bound = scenario_bound(sc, split);
    REQUIRE(bound.prob_floor > 0.0);
    const auto records = run_scenario(sc, 4);
    const auto report = coverage_report(records, bound.prob_floor);
    CHECK(report.verdict == CoverageVerdict::kPass);
}

TEST_CASE("gaussianity diagnostics accept the predictor itself") {
    NoiseScenario sc = base_scenario();
    const auto split = scenario_split(sc);
    std::vector<Matrix> draws;
    const int m = 400;
    draws.reserve(m);
    for (int i = 0; i < m; ++i) {
        draws.push_back(
            spectral::gaussian_predictor(split, svp::sample_noise(sc.n, 9000 + i)));
    }
    const auto report = gaussianity_diagnostics(draws, split);
    CHECK(report.samples == m);
    // Exact Gaussian input: thresholds sit near the null max, so allow the
    // usual factor over the nominal cut.
    CHECK(report.max_abs_skewness < 1.6 * report.skew_threshold);
    CHECK(report.max_abs_excess_kurtosis < 1.6 * report.kurt_threshold);
    CHECK(report.max_variance_ratio_error < 0.35);
}

TEST_CASE("gaussianity thresholds follow the sampling error of the moments") {
    NoiseScenario sc = base_scenario();
    const auto split = scenario_split(sc);
    std::vector<Matrix> draws(2000, Matrix::Zero(sc.n, sc.k));
    for (int i = 0; i < 2000; ++i) {
        draws[i] = spectral::gaussian_predictor(split, svp::sample_noise(sc.n, 100 + i));
    }
    const auto report = gaussianity_diagnostics(draws, split);
    CHECK(report.skew_threshold == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(report.kurt_threshold == doctest::Approx(0.30).epsilon(1e-12));
}

TEST_CASE("gaussianity diagnostics reject too few trials") {
    NoiseScenario sc = base_scenario();
    const auto split = scenario_split(sc);
    std::vector<Matrix> draws(99, Matrix::Zero(sc.n, sc.k));
    CHECK_THROWS_AS(gaussianity_diagnostics(draws, split), InsufficientSamples);
}

TEST_CASE("mgf oracle matches the closed form") {
    const auto at_zero = mgf_oracle(0.0, 1000);
    CHECK(at_zero.analytic == 1.0);
    CHECK(at_zero.empirical == doctest::Approx(1.0).epsilon(1e-12));

    const auto at_half = mgf_oracle(0.5, 1000000);
    CHECK(std::abs(at_half.analytic - 1.1547005383792515) < 1e-12);
    CHECK(std::abs(at_half.empirical - at_half.analytic) / at_half.analytic < 0.02);

    const auto at_nine = mgf_oracle(0.9, 1000000, 7);
    CHECK(std::abs(at_nine.analytic - 2.2941573387056176) < 1e-12);
    CHECK(std::abs(at_nine.empirical - at_nine.analytic) / at_nine.analytic < 0.10);

    CHECK_THROWS_AS(mgf_oracle(1.0, 10), ConfigError);
}

TEST_CASE("trials csv has the frozen schema") {
    NoiseScenario sc = base_scenario();
    sc.trials = 2;
    const auto records = run_scenario(sc, 1);
    const std::string csv = trials_csv(records);
    CHECK(csv.rfind("trial_index,resid_max,rhs,covered,gauss_term_max,rotation_objective,flags\n",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
