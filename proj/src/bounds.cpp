#include "svperturb/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace svp::bounds {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void check_dims(int k, int n) {
    if (k < 1 || k >= n) {
        throw DimensionError("bounds: k must satisfy 1 <= k < n");
    }
}

}  // namespace

BoundInputs BoundInputs::from_spectrum(double eps, int n, int k, double gamma, double beta,
                                       const Vector& spectrum, double u1_max) {
    BoundInputs in;
    in.eps = eps;
    in.n = n;
    in.k = k;
    in.gamma = gamma;
    in.beta = beta;
    in.sigma1 = spectrum;
    in.sigma_min = spectrum.minCoeff();
    in.sigma_inv_norm = 1.0 / in.sigma_min;
    in.u1_max = u1_max;
    in.validate();
    return in;
}

BoundInputs BoundInputs::from_summary(double eps, int n, int k, double gamma, double beta,
                                      double sigma_inv_norm, double sigma_min, double u1_max) {
    BoundInputs in;
    in.eps = eps;
    in.n = n;
    in.k = k;
    in.gamma = gamma;
    in.beta = beta;
    in.sigma_inv_norm = sigma_inv_norm;
    in.sigma_min = sigma_min;
    in.u1_max = u1_max;
    in.validate();
    return in;
}

void BoundInputs::validate() const {
    check_dims(k, n);
    if (eps < 0.0) {
        throw ConfigError("eps: must be nonnegative");
    }
    if (gamma < 0.0) {
        throw ConfigError("gamma: must be nonnegative");
    }
    if (beta <= 0.0 || beta >= 0.5) {
        throw ConfigError("beta: must lie in (0, 0.5)");
    }
    if (sigma_min <= 0.0 || sigma_inv_norm <= 0.0) {
        throw SingularSigma("sigma1: diagonal must be strictly positive");
    }
    if (has_spectrum()) {
        for (Eigen::Index i = 0; i + 1 < sigma1.size(); ++i) {
            if (sigma1(i) < sigma1(i + 1)) {
                throw ConfigError("spectrum: must be sorted non-increasing");
            }
        }
    }
    if (u1_max <= 0.0 || u1_max > 1.0) {
        throw ConfigError("u1_max: must lie in (0, 1]");
    }
}

Alphas alphas(int k, int n, double gamma) {
    check_dims(k, n);
    const double root = std::sqrt(static_cast<double>(k) / n);
    return {1.0 + gamma + root, 2.0 + 2.0 * gamma + 2.0 * root, 2.0 + gamma};
}

ErrorTerms error_terms(const BoundInputs& in) {
    const auto [a1, a2, a3] = alphas(in.k, in.n, in.gamma);
    const double s = in.sigma_inv_norm;
    const double e = in.eps;
    const double e2 = e * e;
    const double e3 = e2 * e;

    ErrorTerms t;
    t.e1 = e3 * s * s * (a1 * a1 * a3 + 2.0 * a1 * a1 * a2 + 2.0 * a1 * a2 * a3)
           + e3 * e * s * s * s * (a1 * a1 * a2 * a2 + 2.0 * a1 * a1 * a2 * a3)
           + e3 * e2 * s * s * s * s * (a1 * a1 * a2 * a2 * a3);
    t.e2 = e2 * s * s * a1 * a1 + 2.0 * e3 * s * s * s * a1 * a1 * a2
           + e2 * e2 * s * s * s * s * a1 * a1 * a2 * a2;
    t.e3 = e2 * (1.0 + in.k) * (1.0 + 2.0 / std::sqrt(static_cast<double>(in.n)))
           * std::pow(static_cast<double>(in.n - in.k), -0.5 + in.beta) * s * s;
    t.e4 = e * a1 * s + e2 * s * s * a1 * a3;
    t.delta1 = in.sigma_min - (2.0 + in.gamma) * e;
    return t;
}

double delta2(const Vector& sigma1, double eps, double gamma) {
    double gap = sigma1.minCoeff();
    for (Eigen::Index i = 0; i < sigma1.size(); ++i) {
        for (Eigen::Index j = i + 1; j < sigma1.size(); ++j) {
            gap = std::min(gap, std::abs(sigma1(i) - sigma1(j)));
        }
    }
    return gap - 2.0 * (2.0 + gamma) * eps;
}

BoundReport theorem_bound(const BoundInputs& in) {
    in.validate();
    const auto [a1, a2, a3] = alphas(in.k, in.n, in.gamma);
    const ErrorTerms t = error_terms(in);
    const double root_k = std::sqrt(static_cast<double>(in.k));

    BoundReport report;
    report.alpha1 = a1;
    report.alpha2 = a2;
    report.alpha3 = a3;
    report.e1 = t.e1;
    report.e2 = t.e2;
    report.e3 = t.e3;
    report.e4 = t.e4;
    report.delta1 = t.delta1;
    if (in.has_spectrum()) {
        report.delta2 = delta2(in.sigma1, in.eps, in.gamma);
    }

    if (t.delta1 <= 0.0) {
        report.violated_conditions.push_back("delta1 <= 0");
    }
    if (t.e2 > 1.0 / (2.0 * root_k)) {
        report.violated_conditions.push_back("E2 > 1/(2*sqrt(k))");
    }
    if (root_k * t.e2 >= 1.0) {
        report.violated_conditions.push_back("sqrt(k)*E2 >= 1");
    }
    report.valid = report.violated_conditions.empty();

    if (report.valid) {
        const double lead = std::sqrt(2.0 * in.k);
        report.rhs = lead * t.e1 / (t.delta1 * (1.0 - t.e1))
                     + lead * (in.u1_max + t.e4) * (std::sqrt(2.0) + 1.0) * root_k * t.e2
                           / (1.0 - root_k * t.e2)
                     + t.e3;
    } else {
        report.rhs = kNan;
    }

    // Exponents combined in log space before exponentiation.
    const double log_term = -std::pow(static_cast<double>(in.n - in.k), in.beta)
                            + std::log(static_cast<double>(in.k) * (in.n + in.k));
    report.prob_floor = 1.0 - 3.0 * std::exp(log_term)
                        - 4.0 * std::exp(-in.n * in.gamma * in.gamma / 2.0);
    report.vacuous_floor = !(report.prob_floor > 0.0);
    return report;
}

std::string BoundReport::to_json() const {
    nlohmann::json j;
    j["alpha1"] = alpha1;
    j["alpha2"] = alpha2;
    j["alpha3"] = alpha3;
    j["e1"] = e1;
    j["e2"] = e2;
    j["e3"] = e3;
    j["e4"] = e4;
    j["delta1"] = delta1;
    if (delta2.has_value()) {
        j["delta2"] = *delta2;
    } else {
        j["delta2"] = nullptr;
    }
    j["rhs"] = std::isfinite(rhs) ? nlohmann::json(rhs) : nlohmann::json(nullptr);
    j["prob_floor"] = prob_floor;
    j["valid"] = valid;
    j["violated_conditions"] = violated_conditions;
    return j.dump(2);
}

DopicoBound dopico_bound(const Matrix& y, const Matrix& y_tilde, const Matrix& u1_tilde,
                         const Matrix& v1_tilde, double delta) {
    if (delta <= 0.0) {
        throw GapCollapse("dopico_bound: delta must be positive");
    }
    const Matrix diff = y - y_tilde;
    const double r2 = (diff * v1_tilde).squaredNorm();
    const double s2 = (diff.transpose() * u1_tilde).squaredNorm();
    return {std::sqrt(r2 + s2) / delta, delta};
}

DopicoBound dopico_bound(const Matrix& y, const Matrix& y_tilde,
                         const spectral::SpectralSplit& clean,
                         const spectral::RankPartition& noisy) {
    // sigma(Sigma2) = {0} here, so the cross-gap term is the smallest noisy
    // leading singular value.
    const double cross_gap = noisy.sigma1_min();
    const double delta = std::min(cross_gap, clean.sigma1.minCoeff() + noisy.sigma1_min());
    return dopico_bound(y, y_tilde, noisy.u1, noisy.v1, delta);
}

WeylGaps weyl_gaps(const Matrix& a, const Matrix& e) {
    if (a.rows() != e.rows() || a.cols() != e.cols()) {
        throw DimensionError("weyl_gaps: shapes do not match");
    }
    const Vector sa = Eigen::BDCSVD<Matrix>(a).singularValues();
    const Vector sb = Eigen::BDCSVD<Matrix>(a + e).singularValues();
    WeylGaps out;
    out.gaps = (sa - sb).cwiseAbs();
    out.e_norm = Eigen::BDCSVD<Matrix>(e).singularValues()(0);
    return out;
}

double szarek_tail(int k, int n, double gamma) {
    if (k < 1 || k > n) {
        throw DimensionError("szarek_tail: k must satisfy 1 <= k <= n");
    }
    if (gamma <= 0.0) {
        throw ConfigError("gamma: must be positive");
    }
    return std::exp(-n * gamma * gamma / 2.0);
}

ProductTail product_tail(int n, double beta) {
    if (n < 2) {
        throw DimensionError("product_tail: n must be at least 2");
    }
    ProductTail t;
    t.threshold = std::pow(static_cast<double>(n), -0.5 + beta);
    t.bound = 2.0 * std::exp(-std::pow(static_cast<double>(n), beta));
    return t;
}

BlockBudget block_spectral_budget(int k, int n, double gamma) {
    check_dims(k, n);
    if (gamma < 0.0) {
        throw ConfigError("gamma: must be nonnegative");
    }
    const double root = std::sqrt(static_cast<double>(k) / n);
    BlockBudget b;
    b.t11 = gamma + 2.0 * root;
    b.t12 = 1.0 + gamma + root;
    b.t21 = b.t12;
    b.t22_full = 2.0 + gamma;
    b.prob = 1.0 - 4.0 * std::exp(-(n - k) * gamma * gamma / 2.0);
    b.vacuous = !(b.prob > 0.0);
    return b;
}

double block_norm_bound(double a11, double a12, double a21, double a22) {
    if (a11 < 0.0 || a12 < 0.0 || a21 < 0.0 || a22 < 0.0) {
        throw ConfigError("block_norm_bound: quadrant norms must be nonnegative");
    }
    const double left = std::sqrt(a11 * a11 + a21 * a21);
    const double right = std::sqrt(a12 * a12 + a22 * a22);
    return std::sqrt(2.0) * std::max(left, right);
}

FeasibilityReport feasibility(double eps, int n, double beta, double u1_max) {
    if (eps < 0.0) {
        throw ConfigError("eps: must be nonnegative");
    }
    if (n < 2) {
        throw DimensionError("feasibility: n must be at least 2");
    }
    if (u1_max <= 0.0) {
        throw ConfigError("u1_max: must be positive");
    }
    FeasibilityReport report;
    report.eps = eps;
    report.threshold = std::min(std::pow(static_cast<double>(n), -beta),
                                1.0 / (u1_max * std::sqrt(static_cast<double>(n))));
    report.ratio = eps / report.threshold;
    report.feasible = report.ratio < 1.0;
    return report;
}

long min_samples_per_symbol(double alpha) {
    if (alpha <= 0.0) {
        throw ConfigError("alpha: must be positive");
    }
    return static_cast<long>(std::ceil(4.0 / (alpha * alpha) - 1e-9));
}

}  // namespace svp::bounds
