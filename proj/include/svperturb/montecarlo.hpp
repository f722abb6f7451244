#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "svperturb/bounds.hpp"
#include "svperturb/spectral.hpp"
#include "svperturb/types.hpp"

namespace svp::mc {

/// Scale of the injected noise. Under kUnitOverN (default) the observed
/// matrix is Y + eps*W with W entries N(0, 1/n); kProblemStatement emulates
/// unit-variance noise by folding sqrt(n) into eps.
enum class NoiseConvention { kUnitOverN, kProblemStatement };

struct NoiseScenario {
    int n = 0;
    int k = 0;
    Vector spectrum;  // descending, strictly positive
    double eps = 0.0;
    double gamma = 0.0;
    double beta = 0.25;
    std::uint64_t basis_seed = 0;
    std::uint64_t noise_seed = 0;  // trial i draws from noise_seed + i
    int trials = 1;
    NoiseConvention convention = NoiseConvention::kUnitOverN;

    double theorem_eps() const;
    void validate() const;
};

struct TrialRecord {
    int trial_index = 0;
    double resid_max = 0.0;
    double rhs = 0.0;
    bool covered = false;
    double gauss_term_max = 0.0;
    double rotation_objective = 0.0;
    double weyl_max_gap = 0.0;
    double noise_norm = 0.0;
    bool degenerate_alignment = false;
    bool vacuous_floor = false;
};

struct TrialDetail {
    TrialRecord record;
    Matrix scaled_residual;  // (U1~ - U1 M)/eps, zero matrix when eps = 0
};

/// n x n matrix of i.i.d. N(0, 1/n) entries; fixed generator, reproducible.
Matrix sample_noise(int n, std::uint64_t seed);

/// Trial-independent state: the noiseless matrix (Haar bases from basis_seed,
/// singular values from the spectrum), its split, and the bound report.
struct ScenarioWorkspace {
    Matrix y;
    spectral::SpectralSplit split;
    bounds::BoundReport bound;
};

ScenarioWorkspace prepare_scenario(const NoiseScenario& scenario);

spectral::SpectralSplit scenario_split(const NoiseScenario& scenario);

/// Theorem inputs (and thus the bound) are trial-independent.
bounds::BoundReport scenario_bound(const NoiseScenario& scenario,
                                   const spectral::SpectralSplit& split);

TrialRecord run_trial(const NoiseScenario& scenario, int trial_index);
TrialDetail run_trial_detailed(const NoiseScenario& scenario, const ScenarioWorkspace& workspace,
                               int trial_index);

/// Trials are independent work items; jobs > 1 executes them on a thread
/// pool with results merged by trial index.
std::vector<TrialRecord> run_scenario(const NoiseScenario& scenario, int jobs = 1);
std::vector<TrialRecord> run_scenario(const NoiseScenario& scenario,
                                      const ScenarioWorkspace& workspace, int jobs);
std::vector<TrialDetail> run_scenario_detailed(const NoiseScenario& scenario, int jobs = 1);

enum class CoverageVerdict { kPass, kFail, kSkippedVacuous };

struct CoverageReport {
    double coverage = 0.0;
    double floor = 0.0;
    double slack = 0.0;  // two-sigma binomial slack at the floor
    int covered = 0;
    int total = 0;
    CoverageVerdict verdict = CoverageVerdict::kPass;
};

CoverageReport coverage_report(const std::vector<TrialRecord>& records, double prob_floor);

const char* verdict_name(CoverageVerdict verdict);

/// Per-entry moments of the pooled scaled residuals, judged against the
/// sampling error of skewness/kurtosis at the given sample count
/// (thresholds sqrt(7.5*6/m) and sqrt(7.5*24/m)).
struct MomentReport {
    Matrix mean;
    Matrix variance;
    Matrix variance_ratio;  // empirical over analytic predictor variance
    Matrix skewness;
    Matrix excess_kurtosis;
    double max_abs_skewness = 0.0;
    double max_abs_excess_kurtosis = 0.0;
    double max_variance_ratio_error = 0.0;
    double skew_threshold = 0.0;
    double kurt_threshold = 0.0;
    int samples = 0;

    bool gaussian() const {
        return max_abs_skewness < skew_threshold && max_abs_excess_kurtosis < kurt_threshold;
    }
};

MomentReport gaussianity_diagnostics(const std::vector<Matrix>& scaled_residuals,
                                     const spectral::SpectralSplit& split);

struct MgfCheck {
    double empirical;
    double analytic;  // sqrt(1/(1 - theta^2))
};

/// Moment generating function of the product of two independent standard
/// normals, empirical vs closed form.
MgfCheck mgf_oracle(double theta, std::int64_t samples, std::uint64_t seed = 0x5eedULL);

std::string trials_csv(const std::vector<TrialRecord>& records);

}  // namespace svp::mc
