#pragma once

#include <utility>

#include "svperturb/types.hpp"

namespace svp::spectral {

/// Partitioned SVD of a rank-k square matrix: Y = U1 * diag(sigma1) * V1^T
/// with the trailing blocks spanning the orthogonal complements.
struct SpectralSplit {
    int n = 0;
    int k = 0;
    Matrix u1, u2;  // n x k, n x (n-k)
    Vector sigma1;  // k, descending, strictly positive
    Matrix v1, v2;

    Matrix reconstruct() const { return u1 * sigma1.asDiagonal() * v1.transpose(); }
};

/// Leading-k partition of a full SVD; used for noisy matrices where the
/// trailing singular values are not zero.
struct RankPartition {
    int n = 0;
    int k = 0;
    Matrix u1, v1;     // n x k
    Vector sigma_all;  // all n singular values, descending

    double sigma1_min() const { return sigma_all(k - 1); }
};

/// Noise expressed in the split's singular bases: Cij = Ui^T W Vj.
struct CBlocks {
    Matrix c11, c12, c21, c22;
};

/// Near-diagonalizing correctors P and O with their second-order blocks.
struct CorrectorPair {
    Matrix p, o;  // n x n, I + O(eps)
    Matrix b;     // (n-k) x k
    Matrix d;     // k x (n-k)
};

struct AlignmentRotation {
    Matrix m;  // k x k orthogonal
    double objective = 0.0;
    bool degenerate = false;
};

/// QR factor with the R diagonal made positive (signs folded into Q).
struct QrFactor {
    Matrix q;
    Matrix r;
};

struct ResidualNorms {
    double resid_max = 0.0;
    double gauss_term_max = 0.0;
};

/// Rotation chain aligning the first-order factor frame with a noisy frame:
/// m = m1 * frame_fit.m.
struct FactorAlignment {
    Matrix m;
    Matrix m1, m1_prime;
    AlignmentRotation frame_fit;
};

/// Partitions the SVD of a numerically rank-k matrix. Sign convention: the
/// first nonzero entry of each U1 column is positive (V1 flipped in step).
/// Throws RankMismatch when sigma_{k+1}/sigma_k >= rank_tol or sigma_k == 0.
SpectralSplit split_svd(const Matrix& y, int k, double rank_tol = 1e-8);

/// Leading-k partition without the rank requirement (noisy decompositions).
/// Same sign convention as split_svd.
RankPartition partition_svd(const Matrix& y, int k);

CBlocks rotate_noise(const SpectralSplit& split, const Matrix& w);

Matrix assemble_blocks(const CBlocks& c);

CorrectorPair build_correctors(const CBlocks& c, const Vector& sigma1, double eps);

/// ((UP)_1, (VO)_1): first k columns of U*P and V*O in closed form.
std::pair<Matrix, Matrix> first_order_bases(const SpectralSplit& split, const CBlocks& c,
                                            const CorrectorPair& pair, double eps);

/// N = U2 U2^T W V1 Sigma1^{-1}; columns lie in span(U2).
Matrix gaussian_predictor(const SpectralSplit& split, const Matrix& w);

/// Joint orthogonal Procrustes fit: m minimizes
/// sqrt(|U1 m - U1~|_F^2 + |V1 m - V1~|_F^2), m = Z1 Z2^T from the SVD of
/// U1^T U1~ + V1^T V1~. Flagged degenerate (not fatal) when that matrix has
/// a singular value below 1e-12.
AlignmentRotation procrustes_rotation(const Matrix& u1, const Matrix& u1_tilde,
                                      const Matrix& v1, const Matrix& v1_tilde);

ResidualNorms aligned_residual(const Matrix& u1, const Matrix& u1_tilde, const Matrix& m,
                               double eps, const Matrix& n_pred);

QrFactor orthonormalize(const Matrix& a);

/// The k x k core block R_u^{-T} (Sigma1 + eps C11 + eps^2 (Sigma1^{-1} C21^T C21
/// + C12 C12^T Sigma1^{-1})) R_v^{-1} whose SVD supplies the inner rotations.
Matrix first_order_core(const SpectralSplit& split, const CBlocks& c, double eps,
                        const Matrix& r_u, const Matrix& r_v);

/// Full construction: correctors -> first-order bases -> QR -> core SVD ->
/// Procrustes fit of the constructed frame onto (u1_tilde, v1_tilde).
/// The resulting m is the rotation for which the aligned residual stays at
/// second order in eps.
FactorAlignment factor_alignment(const SpectralSplit& split, const CBlocks& c, double eps,
                                 const Matrix& u1_tilde, const Matrix& v1_tilde);

}  // namespace svp::spectral
