#include "svperturb/montecarlo.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <thread>

#include "svperturb/rng.hpp"

namespace svp::mc {

namespace {

std::string fmt(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
    if (jobs <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<int> next{0};
    const int workers = std::min(jobs, count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
}

}  // namespace

double NoiseScenario::theorem_eps() const {
    return convention == NoiseConvention::kUnitOverN ? eps
                                                     : eps * std::sqrt(static_cast<double>(n));
}

void NoiseScenario::validate() const {
    if (k < 1 || k >= n || n < 2) {
        throw DimensionError("scenario: requires 2 <= n and 1 <= k < n");
    }
    if (spectrum.size() != k) {
        throw ConfigError("spectrum: must have exactly k entries");
    }
    if (spectrum.minCoeff() <= 0.0) {
        throw ConfigError("spectrum: entries must be strictly positive");
    }
    for (Eigen::Index i = 0; i + 1 < spectrum.size(); ++i) {
        if (spectrum(i) < spectrum(i + 1)) {
            throw ConfigError("spectrum: must be sorted non-increasing");
        }
    }
    if (eps < 0.0) {
        throw ConfigError("eps: must be nonnegative");
    }
    if (gamma < 0.0) {
        throw ConfigError("gamma: must be nonnegative");
    }
    if (beta <= 0.0 || beta >= 0.5) {
        throw ConfigError("beta: must lie in (0, 0.5)");
    }
    if (trials < 1) {
        throw ConfigError("trials: must be at least 1");
    }
}

Matrix sample_noise(int n, std::uint64_t seed) { return svp::sample_noise(n, seed); }

ScenarioWorkspace prepare_scenario(const NoiseScenario& sc) {
    sc.validate();
    const Matrix u = random_orthogonal(sc.n, sc.basis_seed);
    const Matrix v = random_orthogonal(sc.n, mix_seed(sc.basis_seed, 1));
    ScenarioWorkspace ws;
    ws.y = u.leftCols(sc.k) * sc.spectrum.asDiagonal() * v.leftCols(sc.k).transpose();
    ws.split = spectral::split_svd(ws.y, sc.k);
    ws.bound = scenario_bound(sc, ws.split);
    return ws;
}

spectral::SpectralSplit scenario_split(const NoiseScenario& sc) {
    sc.validate();
    const Matrix u = random_orthogonal(sc.n, sc.basis_seed);
    const Matrix v = random_orthogonal(sc.n, mix_seed(sc.basis_seed, 1));
    const Matrix y =
        u.leftCols(sc.k) * sc.spectrum.asDiagonal() * v.leftCols(sc.k).transpose();
    return spectral::split_svd(y, sc.k);
}

bounds::BoundReport scenario_bound(const NoiseScenario& sc,
                                   const spectral::SpectralSplit& split) {
    const auto inputs = bounds::BoundInputs::from_spectrum(
        sc.theorem_eps(), sc.n, sc.k, sc.gamma, sc.beta, sc.spectrum, max_norm(split.u1));
    return bounds::theorem_bound(inputs);
}

TrialDetail run_trial_detailed(const NoiseScenario& sc, const ScenarioWorkspace& ws,
                               int trial_index) {
    const spectral::SpectralSplit& split = ws.split;
    const bounds::BoundReport& bound = ws.bound;
    const double eps = sc.theorem_eps();
    const Matrix w = sample_noise(sc.n, sc.noise_seed + static_cast<std::uint64_t>(trial_index));
    const Matrix y_tilde = ws.y + eps * w;

    const spectral::RankPartition noisy = spectral::partition_svd(y_tilde, sc.k);
    Matrix rotation = Matrix::Identity(sc.k, sc.k);
    double rotation_objective = 0.0;
    bool degenerate = false;
    if (eps > 0.0) {
        const spectral::CBlocks c = spectral::rotate_noise(split, w);
        const spectral::FactorAlignment fa =
            spectral::factor_alignment(split, c, eps, noisy.u1, noisy.v1);
        rotation = fa.m;
        rotation_objective = fa.frame_fit.objective;
        degenerate = fa.frame_fit.degenerate;
    }
    const Matrix n_pred = spectral::gaussian_predictor(split, w);
    const spectral::ResidualNorms norms =
        spectral::aligned_residual(split.u1, noisy.u1, rotation, eps, n_pred);

    Vector sigma_clean = Vector::Zero(sc.n);
    sigma_clean.head(sc.k) = split.sigma1;
    const double max_gap = (sigma_clean - noisy.sigma_all).cwiseAbs().maxCoeff();
    const double noise_norm = Eigen::BDCSVD<Matrix>(eps * w).singularValues()(0);

    TrialDetail detail;
    TrialRecord& rec = detail.record;
    rec.trial_index = trial_index;
    rec.resid_max = norms.resid_max;
    rec.rhs = bound.rhs;
    rec.covered = norms.resid_max <= bound.rhs;  // NaN rhs compares false
    rec.gauss_term_max = norms.gauss_term_max;
    rec.rotation_objective = rotation_objective;
    rec.weyl_max_gap = max_gap;
    rec.noise_norm = noise_norm;
    rec.degenerate_alignment = degenerate;
    rec.vacuous_floor = bound.vacuous_floor;

    detail.scaled_residual = eps > 0.0
                                 ? Matrix(((noisy.u1 - split.u1 * rotation) / eps).eval())
                                 : Matrix(Matrix::Zero(sc.n, sc.k));
    return detail;
}

TrialRecord run_trial(const NoiseScenario& sc, int trial_index) {
    return run_trial_detailed(sc, prepare_scenario(sc), trial_index).record;
}

std::vector<TrialDetail> run_scenario_detailed(const NoiseScenario& sc, int jobs) {
    const ScenarioWorkspace ws = prepare_scenario(sc);
    std::vector<TrialDetail> details(sc.trials);
    parallel_for(sc.trials, jobs, [&](int i) { details[i] = run_trial_detailed(sc, ws, i); });
    return details;
}

std::vector<TrialRecord> run_scenario(const NoiseScenario& sc, const ScenarioWorkspace& ws,
                                      int jobs) {
    std::vector<TrialRecord> records(sc.trials);
    parallel_for(sc.trials, jobs,
                 [&](int i) { records[i] = run_trial_detailed(sc, ws, i).record; });
    return records;
}

std::vector<TrialRecord> run_scenario(const NoiseScenario& sc, int jobs) {
    return run_scenario(sc, prepare_scenario(sc), jobs);
}

CoverageReport coverage_report(const std::vector<TrialRecord>& records, double prob_floor) {
    if (records.empty()) {
        throw InsufficientSamples("coverage_report: needs at least one record");
    }
    CoverageReport report;
    report.total = static_cast<int>(records.size());
    for (const auto& r : records) {
        report.covered += r.covered ? 1 : 0;
    }
    report.coverage = static_cast<double>(report.covered) / report.total;
    report.floor = prob_floor;
    if (!(prob_floor > 0.0)) {
        report.verdict = CoverageVerdict::kSkippedVacuous;
        return report;
    }
    const double p = std::min(prob_floor, 1.0);
    report.slack = 2.0 * std::sqrt(p * (1.0 - p) / report.total);
    report.verdict = report.coverage >= prob_floor - report.slack ? CoverageVerdict::kPass
                                                                  : CoverageVerdict::kFail;
    return report;
}

const char* verdict_name(CoverageVerdict verdict) {
    switch (verdict) {
        case CoverageVerdict::kPass:
            return "PASS";
        case CoverageVerdict::kFail:
            return "FAIL";
        case CoverageVerdict::kSkippedVacuous:
            return "SKIPPED_VACUOUS";
    }
    return "UNKNOWN";
}

MomentReport gaussianity_diagnostics(const std::vector<Matrix>& scaled_residuals,
                                     const spectral::SpectralSplit& split) {
    const int m = static_cast<int>(scaled_residuals.size());
    if (m < 100) {
        throw InsufficientSamples("gaussianity_diagnostics: needs at least 100 trials");
    }
    const Eigen::Index rows = split.n;
    const Eigen::Index cols = split.k;

    MomentReport report;
    report.samples = m;
    report.mean = Matrix::Zero(rows, cols);
    for (const auto& r : scaled_residuals) {
        report.mean += r;
    }
    report.mean /= m;

    Matrix m2 = Matrix::Zero(rows, cols);
    Matrix m3 = Matrix::Zero(rows, cols);
    Matrix m4 = Matrix::Zero(rows, cols);
    for (const auto& r : scaled_residuals) {
        const Matrix d = r - report.mean;
        const Matrix d2 = d.cwiseProduct(d);
        m2 += d2;
        m3 += d2.cwiseProduct(d);
        m4 += d2.cwiseProduct(d2);
    }
    m2 /= m;
    m3 /= m;
    m4 /= m;

    report.variance = m2 * (static_cast<double>(m) / (m - 1));
    report.skewness = m3.cwiseQuotient(m2.array().pow(1.5).matrix());
    report.excess_kurtosis = m4.cwiseQuotient(m2.cwiseProduct(m2)) - 3.0 * Matrix::Ones(rows, cols);

    // Analytic predictor entry variance: (U2 U2^T)_{ii} / (n sigma_j^2).
    const Vector proj_diag = (split.u2 * split.u2.transpose()).diagonal();
    report.variance_ratio = Matrix(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double analytic =
                proj_diag(i) / (split.n * split.sigma1(j) * split.sigma1(j));
            report.variance_ratio(i, j) = report.variance(i, j) / analytic;
        }
    }

    report.max_abs_skewness = max_norm(report.skewness);
    report.max_abs_excess_kurtosis = max_norm(report.excess_kurtosis);
    report.max_variance_ratio_error =
        max_norm(report.variance_ratio - Matrix::Ones(rows, cols));
    report.skew_threshold = std::sqrt(7.5 * 6.0 / m);
    report.kurt_threshold = std::sqrt(7.5 * 24.0 / m);
    return report;
}

MgfCheck mgf_oracle(double theta, std::int64_t samples, std::uint64_t seed) {
    if (theta < 0.0 || theta >= 1.0) {
        throw ConfigError("theta: must lie in [0, 1)");
    }
    if (samples < 1) {
        throw ConfigError("samples: must be at least 1");
    }
    GaussianStream stream(seed);
    double acc = 0.0;
    for (std::int64_t i = 0; i < samples; ++i) {
        const double x = stream.next() * stream.next();
        acc += std::exp(theta * x);
    }
    return {acc / static_cast<double>(samples), std::sqrt(1.0 / (1.0 - theta * theta))};
}

std::string trials_csv(const std::vector<TrialRecord>& records) {
    std::string out =
        "trial_index,resid_max,rhs,covered,gauss_term_max,rotation_objective,flags\n";
    for (const auto& r : records) {
        out += std::to_string(r.trial_index);
        out += ',';
        out += fmt(r.resid_max);
        out += ',';
        out += fmt(r.rhs);
        out += ',';
        out += r.covered ? '1' : '0';
        out += ',';
        out += fmt(r.gauss_term_max);
        out += ',';
        out += fmt(r.rotation_objective);
        out += ',';
        std::string flags;
        if (r.degenerate_alignment) {
            flags += "degenerate_alignment";
        }
        if (r.vacuous_floor) {
            if (!flags.empty()) {
                flags += ';';
            }
            flags += "vacuous_floor";
        }
        out += flags;
        out += '\n';
    }
    return out;
}

}  // namespace svp::mc
