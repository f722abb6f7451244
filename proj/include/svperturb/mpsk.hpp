#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "svperturb/bounds.hpp"
#include "svperturb/types.hpp"

namespace svp::mpsk {

using Points2 = Eigen::Matrix2Xd;

/// One synthetic capture: N_sym symbol periods sampled L times each.
/// n0 is the noise spectral density scale; discrete samples carry Gaussian
/// noise of variance n0/2 (two-sided density n0/2 sampled at unit aperture),
/// which is the scaling the predicted cluster radius assumes.
struct MpskScenario {
    int m_order = 4;              // one of 2, 4, 8, 16, 32
    double fc_hz = 1e9;           // carrier frequency
    double symbol_period_s = 1e-7;
    double theta_c = 0.0;         // carrier phase
    int samples_per_symbol = 21;  // L; must not divide fc*T
    int symbols = 200;            // N_sym
    double n0 = 0.0;
    std::uint64_t seed = 0;

    long carrier_cycles() const;  // fc*T rounded; throws if not near-integer
    void validate() const;
};

struct SynthResult {
    Matrix y;  // L x N_sym
    std::vector<int> theta_indices;
};

struct ReferenceFactors {
    Matrix u;      // L x 2, exactly orthonormal when L does not divide fc*T
    Matrix v;      // N x 2, near-orthonormal
    double sigma;  // sqrt(L*N)/2, both leading singular values
};

struct Normalized {
    Matrix y_tilde;         // 2 Y / sqrt(L N)
    double eps_effective;   // 2 / sqrt(L), the noise-energy factor
};

struct ConstellationEmbedding {
    Points2 points;  // columns of basis^T Y~
    Matrix basis;    // L x 2 leading left singular vectors
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    bool rank1 = false;  // sigma2/sigma1 below the guard threshold
};

struct ClusterResult {
    Points2 modes;
    std::vector<int> assignments;
    int m_hat = 0;
    double radius_used = 0.0;
    int nonconverged = 0;
};

struct ClassifyOptions {
    double rank1_guard = 0.1;
    double beta = 0.25;  // dominance-condition exponent for the report
    bool snap_to_power_of_two = false;
};

struct ClassifyResult {
    ConstellationEmbedding embedding;
    ClusterResult clusters;
    double radius = 0.0;
    bounds::FeasibilityReport feasibility;
    long min_feasible_l = 0;
    int m_hat = 0;
};

double snr_db_to_n0(double snr_db);  // N0 = 0.5 * 10^(-snr/10), signal power 1/2
double n0_to_snr_db(double n0);
double noise_stddev(double n0);      // sqrt(n0/2)

std::vector<int> draw_symbol_phases(const MpskScenario& scenario);

Matrix noiseless_matrix(const MpskScenario& scenario, const std::vector<int>& theta_indices);

SynthResult synth_matrix(const MpskScenario& scenario);

/// Closed-form factors of the noiseless matrix; U^T U = I within 1e-10 and
/// U * sigma * V^T reproduces it whenever L does not divide fc*T.
ReferenceFactors reference_factors(const MpskScenario& scenario);

Normalized normalize(const Matrix& y);

ConstellationEmbedding embed(const Matrix& y_tilde, double rank1_guard = 0.1);

/// 95th percentile of the embedded per-point noise:
/// 2.45 sqrt(2 n0 (1 - 2/N) / (L N)).
double predicted_radius(double n0, int samples_per_symbol, int symbols);

/// Gaussian-kernel mean shift with bandwidth = radius; trajectories stop at
/// shift < radius*1e-3 or 500 iterations (capped points are flagged and
/// assigned to the nearest mode); modes closer than radius/2 merge.
ClusterResult mean_shift(const Points2& points, double radius);

/// Same procedure on a 1-D embedding (modes reported with y = 0).
ClusterResult mean_shift_1d(const Vector& xs, double radius);

/// normalize -> embed -> predicted radius -> mean shift (1-D when the
/// rank-1 guard fires), with the sampling-feasibility report attached.
ClassifyResult classify(const Matrix& y_noisy, double n0, const ClassifyOptions& options = {});

struct SweepRow {
    int m_order = 0;
    double snr_db = 0.0;
    int runs = 0;
    int successes = 0;  // strict M_hat == M_order
    double rate = 0.0;
};

std::vector<SweepRow> snr_sweep(const MpskScenario& base, const std::vector<int>& m_orders,
                                const std::vector<double>& snr_db_grid, int runs_per_point,
                                int jobs = 1);

std::string points_csv(const ClassifyResult& result, const std::vector<int>& theta_indices);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace svp::mpsk
