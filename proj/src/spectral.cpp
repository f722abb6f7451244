#include "svperturb/spectral.hpp"

#include <cmath>

namespace svp::spectral {

namespace {

constexpr double kSigmaFloor = 1e-14;
constexpr double kDegenerateTol = 1e-12;

// First nonzero entry of each column of `primary` made positive; `paired`
// columns flipped together to preserve the product.
void apply_sign_convention(Matrix& primary, Matrix* paired) {
    for (Eigen::Index j = 0; j < primary.cols(); ++j) {
        for (Eigen::Index i = 0; i < primary.rows(); ++i) {
            const double x = primary(i, j);
            if (x != 0.0) {
                if (x < 0.0) {
                    primary.col(j) *= -1.0;
                    if (paired != nullptr) {
                        paired->col(j) *= -1.0;
                    }
                }
                break;
            }
        }
    }
}

void check_square(const Matrix& y, int k) {
    if (y.rows() != y.cols()) {
        throw DimensionError("split_svd: matrix must be square");
    }
    const int n = static_cast<int>(y.rows());
    if (n < 2) {
        throw DimensionError("split_svd: n must be at least 2");
    }
    if (k < 1 || k >= n) {
        throw DimensionError("split_svd: k must satisfy 1 <= k < n");
    }
}

}  // namespace

SpectralSplit split_svd(const Matrix& y, int k, double rank_tol) {
    check_square(y, k);
    const int n = static_cast<int>(y.rows());

    Eigen::BDCSVD<Matrix> svd(y, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    if (sv(k - 1) <= 0.0 || sv(k) >= rank_tol * sv(k - 1)) {
        throw RankMismatch("split_svd: input is not numerically rank " + std::to_string(k));
    }

    SpectralSplit split;
    split.n = n;
    split.k = k;
    split.u1 = svd.matrixU().leftCols(k);
    split.u2 = svd.matrixU().rightCols(n - k);
    split.v1 = svd.matrixV().leftCols(k);
    split.v2 = svd.matrixV().rightCols(n - k);
    split.sigma1 = sv.head(k);
    apply_sign_convention(split.u1, &split.v1);
    apply_sign_convention(split.u2, nullptr);
    apply_sign_convention(split.v2, nullptr);
    return split;
}

RankPartition partition_svd(const Matrix& y, int k) {
    check_square(y, k);

    Eigen::BDCSVD<Matrix> svd(y, Eigen::ComputeFullU | Eigen::ComputeFullV);
    RankPartition part;
    part.n = static_cast<int>(y.rows());
    part.k = k;
    part.u1 = svd.matrixU().leftCols(k);
    part.v1 = svd.matrixV().leftCols(k);
    part.sigma_all = svd.singularValues();
    apply_sign_convention(part.u1, &part.v1);
    return part;
}

CBlocks rotate_noise(const SpectralSplit& split, const Matrix& w) {
    if (w.rows() != split.n || w.cols() != split.n) {
        throw DimensionError("rotate_noise: W must be n x n");
    }
    CBlocks c;
    c.c11 = split.u1.transpose() * w * split.v1;
    c.c12 = split.u1.transpose() * w * split.v2;
    c.c21 = split.u2.transpose() * w * split.v1;
    c.c22 = split.u2.transpose() * w * split.v2;
    return c;
}

Matrix assemble_blocks(const CBlocks& c) {
    const Eigen::Index k = c.c11.rows();
    const Eigen::Index m = c.c22.rows();
    Matrix full(k + m, k + m);
    full.topLeftCorner(k, k) = c.c11;
    full.topRightCorner(k, m) = c.c12;
    full.bottomLeftCorner(m, k) = c.c21;
    full.bottomRightCorner(m, m) = c.c22;
    return full;
}

CorrectorPair build_correctors(const CBlocks& c, const Vector& sigma1, double eps) {
    if (sigma1.minCoeff() < kSigmaFloor) {
        throw SingularSigma("build_correctors: Sigma1 has a near-zero diagonal entry");
    }
    const Eigen::Index k = c.c11.rows();
    const Eigen::Index m = c.c22.rows();
    const Vector sig_inv = sigma1.cwiseInverse();
    const Matrix si = sig_inv.asDiagonal();
    const Matrix si2 = sig_inv.cwiseProduct(sig_inv).asDiagonal();

    CorrectorPair pair;
    pair.b = -c.c22 * c.c12.transpose() * si2 + c.c21 * si * c.c11 * si;
    pair.d = -si2 * c.c21.transpose() * c.c22 + si * c.c11 * si * c.c12;

    pair.p = Matrix::Identity(k + m, k + m);
    pair.p.topRightCorner(k, m) += -eps * (si * c.c21.transpose()) + eps * eps * pair.b.transpose();
    pair.p.bottomLeftCorner(m, k) += eps * (c.c21 * si) - eps * eps * pair.b;

    pair.o = Matrix::Identity(k + m, k + m);
    pair.o.topRightCorner(k, m) += -eps * (si * c.c12) + eps * eps * pair.d;
    pair.o.bottomLeftCorner(m, k) += eps * (c.c12.transpose() * si) - eps * eps * pair.d.transpose();
    return pair;
}

std::pair<Matrix, Matrix> first_order_bases(const SpectralSplit& split, const CBlocks& c,
                                            const CorrectorPair& pair, double eps) {
    const Matrix si = split.sigma1.cwiseInverse().asDiagonal();
    Matrix up1 = split.u1 + eps * split.u2 * c.c21 * si - eps * eps * split.u2 * pair.b;
    Matrix vo1 = split.v1 + eps * split.v2 * c.c12.transpose() * si
                 - eps * eps * split.v2 * pair.d.transpose();
    return {std::move(up1), std::move(vo1)};
}

Matrix gaussian_predictor(const SpectralSplit& split, const Matrix& w) {
    if (w.rows() != split.n || w.cols() != split.n) {
        throw DimensionError("gaussian_predictor: W must be n x n");
    }
    if (split.sigma1.minCoeff() < kSigmaFloor) {
        throw SingularSigma("gaussian_predictor: Sigma1 has a near-zero diagonal entry");
    }
    const Matrix si = split.sigma1.cwiseInverse().asDiagonal();
    return split.u2 * (split.u2.transpose() * w * split.v1) * si;
}

AlignmentRotation procrustes_rotation(const Matrix& u1, const Matrix& u1_tilde,
                                      const Matrix& v1, const Matrix& v1_tilde) {
    if (u1.rows() != u1_tilde.rows() || u1.cols() != u1_tilde.cols() ||
        v1.rows() != v1_tilde.rows() || v1.cols() != v1_tilde.cols() ||
        u1.cols() != v1.cols()) {
        throw DimensionError("procrustes_rotation: frame shapes do not match");
    }
    const Matrix cross = u1.transpose() * u1_tilde + v1.transpose() * v1_tilde;
    Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);

    AlignmentRotation rot;
    rot.m = svd.matrixU() * svd.matrixV().transpose();
    rot.degenerate = svd.singularValues().minCoeff() < kDegenerateTol;
    const double du = (u1 * rot.m - u1_tilde).squaredNorm();
    const double dv = (v1 * rot.m - v1_tilde).squaredNorm();
    rot.objective = std::sqrt(du + dv);
    return rot;
}

ResidualNorms aligned_residual(const Matrix& u1, const Matrix& u1_tilde, const Matrix& m,
                               double eps, const Matrix& n_pred) {
    if (u1.rows() != u1_tilde.rows() || u1.cols() != u1_tilde.cols() ||
        n_pred.rows() != u1.rows() || n_pred.cols() != u1.cols() ||
        m.rows() != u1.cols() || m.cols() != u1.cols()) {
        throw DimensionError("aligned_residual: shapes do not match");
    }
    ResidualNorms norms;
    norms.resid_max = max_norm(u1_tilde - u1 * m - eps * n_pred);
    norms.gauss_term_max = max_norm(eps * n_pred);
    return norms;
}

QrFactor orthonormalize(const Matrix& a) {
    Eigen::HouseholderQR<Matrix> qr(a);
    const Eigen::Index k = a.cols();
    QrFactor factor;
    factor.q = Matrix(qr.householderQ()).leftCols(k);
    factor.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < k; ++j) {
        if (factor.r(j, j) < 0.0) {
            factor.q.col(j) *= -1.0;
            factor.r.row(j) *= -1.0;
        }
    }
    return factor;
}

Matrix first_order_core(const SpectralSplit& split, const CBlocks& c, double eps,
                        const Matrix& r_u, const Matrix& r_v) {
    const Matrix si = split.sigma1.cwiseInverse().asDiagonal();
    Matrix core = Matrix(split.sigma1.asDiagonal()) + eps * c.c11
                  + eps * eps * (si * c.c21.transpose() * c.c21 + c.c12 * c.c12.transpose() * si);
    core = r_u.transpose().triangularView<Eigen::Lower>().solve(core);
    core = r_v.transpose().triangularView<Eigen::Lower>().solve(core.transpose()).transpose();
    return core;
}

FactorAlignment factor_alignment(const SpectralSplit& split, const CBlocks& c, double eps,
                                 const Matrix& u1_tilde, const Matrix& v1_tilde) {
    const CorrectorPair pair = build_correctors(c, split.sigma1, eps);
    const auto [up1, vo1] = first_order_bases(split, c, pair, eps);
    const QrFactor fu = orthonormalize(up1);
    const QrFactor fv = orthonormalize(vo1);
    const Matrix core = first_order_core(split, c, eps, fu.r, fv.r);

    Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
    FactorAlignment fa;
    fa.m1 = svd.matrixU();
    fa.m1_prime = svd.matrixV();
    fa.frame_fit = procrustes_rotation(fu.q * fa.m1, u1_tilde, fv.q * fa.m1_prime, v1_tilde);
    fa.m = fa.m1 * fa.frame_fit.m;
    return fa;
}

}  // namespace svp::spectral
