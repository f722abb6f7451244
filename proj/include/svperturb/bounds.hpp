#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svperturb/spectral.hpp"
#include "svperturb/types.hpp"

namespace svp::bounds {

struct Alphas {
    double a1, a2, a3;
};

struct ErrorTerms {
    double e1, e2, e3, e4;
    double delta1;
};

struct BoundInputs {
    double eps = 0.0;
    int n = 0;
    int k = 0;
    double gamma = 0.0;
    double beta = 0.25;
    Vector sigma1;   // full diagonal when known; may be empty
    double sigma_inv_norm = 0.0;
    double sigma_min = 0.0;
    double u1_max = 1.0;

    static BoundInputs from_spectrum(double eps, int n, int k, double gamma, double beta,
                                     const Vector& spectrum, double u1_max);
    static BoundInputs from_summary(double eps, int n, int k, double gamma, double beta,
                                    double sigma_inv_norm, double sigma_min, double u1_max);

    bool has_spectrum() const { return sigma1.size() > 0; }
    void validate() const;
};

struct BoundReport {
    double alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0;
    double e1 = 0.0, e2 = 0.0, e3 = 0.0, e4 = 0.0;
    double delta1 = 0.0;
    std::optional<double> delta2;
    double rhs = 0.0;  // NaN when a precondition fails
    double prob_floor = 0.0;
    bool valid = false;
    bool vacuous_floor = false;
    std::vector<std::string> violated_conditions;

    std::string to_json() const;
};

Alphas alphas(int k, int n, double gamma);

ErrorTerms error_terms(const BoundInputs& inputs);

/// Gap-aware margin for the distinct-eigenvalue corollary:
/// min{min_{i!=j} |sigma_i - sigma_j|, sigma_min} - 2(2+gamma)eps.
double delta2(const Vector& sigma1, double eps, double gamma);

BoundReport theorem_bound(const BoundInputs& inputs);

struct DopicoBound {
    double bound;
    double delta;
};

/// Subspace-alignment bound sqrt(|R|_F^2 + |S|_F^2)/delta with
/// R = (Y - Y~) V1~ and S = (Y - Y~)^T U1~, with delta supplied explicitly.
DopicoBound dopico_bound(const Matrix& y, const Matrix& y_tilde, const Matrix& u1_tilde,
                         const Matrix& v1_tilde, double delta);

/// Same bound with delta computed from the two decompositions. In the
/// Sigma2 = 0 setting this reduces to the smallest noisy leading singular
/// value.
DopicoBound dopico_bound(const Matrix& y, const Matrix& y_tilde,
                         const spectral::SpectralSplit& clean,
                         const spectral::RankPartition& noisy);

struct WeylGaps {
    Vector gaps;
    double e_norm;
};

/// Per-index singular-value gaps between A and A+E; each gap <= |E|_2.
WeylGaps weyl_gaps(const Matrix& a, const Matrix& e);

/// exp(-n gamma^2 / 2): tail bound for the top singular value of an n x k
/// Gaussian matrix with entry variance 1/n exceeding 1 + sqrt(k/n) + gamma.
double szarek_tail(int k, int n, double gamma);

struct ProductTail {
    double threshold;
    double bound;
};

/// Tail of the mean of n products of independent standard normals:
/// P(mean > n^{-1/2+beta}) <= 2 exp(-n^beta).
ProductTail product_tail(int n, double beta);

struct BlockBudget {
    double t11;
    double t12;
    double t21;
    double t22_full;  // shared budget for |T|_2 and |T22|_2
    double prob;
    bool vacuous;
};

BlockBudget block_spectral_budget(int k, int n, double gamma);

/// sqrt(2) * max(sqrt(a11^2 + a21^2), sqrt(a12^2 + a22^2)) >= |A|_2.
double block_norm_bound(double a11, double a12, double a21, double a22);

struct FeasibilityReport {
    double eps = 0.0;
    double threshold = 0.0;
    double ratio = 0.0;  // eps / threshold; Gaussian-dominance margin
    bool feasible = false;
};

/// Dominance condition on (eps, n): eps against min{n^{-beta}, 1/(u1_max sqrt(n))}.
FeasibilityReport feasibility(double eps, int n, double beta, double u1_max);

/// Minimal samples per symbol so that 2/sqrt(L) < alpha: ceil(4/alpha^2).
long min_samples_per_symbol(double alpha);

}  // namespace svp::bounds
