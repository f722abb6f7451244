#include <doctest.h>

#include <cmath>

#include "svperturb/rng.hpp"
#include "svperturb/spectral.hpp"

using namespace svp;
using namespace svp::spectral;

namespace {

Vector vec(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) {
        v(i++) = x;
    }
    return v;
}

SpectralSplit random_split(int n, int k, const Vector& spectrum, std::uint64_t seed) {
    const Matrix u = random_orthogonal(n, seed);
    const Matrix v = random_orthogonal(n, mix_seed(seed, 1));
    const Matrix y = u.leftCols(k) * spectrum.asDiagonal() * v.leftCols(k).transpose();
    return split_svd(y, k);
}

// C blocks with N(0, 1/n) entries, as one rotation of a noise draw gives.
CBlocks random_blocks(int n, int k, std::uint64_t seed) {
    const Matrix w = sample_noise(n, seed);
    CBlocks c;
    c.c11 = w.topLeftCorner(k, k);
    c.c12 = w.topRightCorner(k, n - k);
    c.c21 = w.bottomLeftCorner(n - k, k);
    c.c22 = w.bottomRightCorner(n - k, n - k);
    return c;
}

}  // namespace

TEST_CASE("split_svd of a diagonal matrix") {
    Matrix y = Matrix::Zero(4, 4);
    y(0, 0) = 3.0;
    y(1, 1) = 2.0;
    const auto split = split_svd(y, 2);
    CHECK(split.sigma1(0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(split.sigma1(1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(max_norm(split.u1 - Matrix::Identity(4, 2)) < 1e-12);
    CHECK(max_norm(split.v1 - Matrix::Identity(4, 2)) < 1e-12);
}

TEST_CASE("split_svd rejects rank-deficient and ill-shaped inputs") {
    CHECK_THROWS_AS(split_svd(Matrix::Zero(4, 4), 1), RankMismatch);
    Matrix y = Matrix::Zero(4, 4);
    y(0, 0) = 1.0;
    CHECK_THROWS_AS(split_svd(y, 2), RankMismatch);   // sigma_2 = 0
    CHECK_THROWS_AS(split_svd(y, 4), DimensionError);  // k >= n
    CHECK_THROWS_AS(split_svd(Matrix::Zero(3, 4), 1), DimensionError);
}

TEST_CASE("split_svd round trip on a seeded construction") {
    Matrix y;
    {
        const Matrix q = random_orthogonal(3, 7);
        const Matrix r = random_orthogonal(3, mix_seed(7, 1));
        y = q.leftCols(2) * vec({5.0, 1.0}).asDiagonal() * r.leftCols(2).transpose();
    }
    const auto split = split_svd(y, 2);
    CHECK(split.sigma1(0) == doctest::Approx(5.0).epsilon(1e-10));
    CHECK(split.sigma1(1) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(max_norm(split.reconstruct() - y) < 1e-10);
}

TEST_CASE("split_svd satisfies the orthogonality and sign invariants") {
    const auto split = random_split(15, 3, vec({3.0, 2.0, 1.0}), 21);
    const Matrix ik = Matrix::Identity(3, 3);
    CHECK(max_norm(split.u1.transpose() * split.u1 - ik) < 1e-10);
    CHECK(max_norm(split.v1.transpose() * split.v1 - ik) < 1e-10);
    CHECK(max_norm(split.u1.transpose() * split.u2) < 1e-10);
    CHECK(max_norm(split.v1.transpose() * split.v2) < 1e-10);
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 15; ++i) {
            if (split.u1(i, j) != 0.0) {
                CHECK(split.u1(i, j) > 0.0);
                break;
            }
        }
    }
}

TEST_CASE("rotate_noise block structure") {
    const auto split = random_split(10, 2, vec({2.0, 1.0}), 3);

    const auto zero = rotate_noise(split, Matrix::Zero(10, 10));
    CHECK(max_norm(assemble_blocks(zero)) == 0.0);

    // Identity bases make the blocks literal quadrants.
    Matrix diag = Matrix::Zero(4, 4);
    diag(0, 0) = 2.0;
    diag(1, 1) = 1.0;
    const auto id_split = split_svd(diag, 2);
    const Matrix w4 = gaussian_matrix(4, 4, 1.0, 5);
    const auto c = rotate_noise(id_split, w4);
    CHECK(max_norm(c.c11 - w4.topLeftCorner(2, 2)) < 1e-12);
    CHECK(max_norm(c.c22 - w4.bottomRightCorner(2, 2)) < 1e-12);

    CHECK_THROWS_AS(rotate_noise(split, Matrix::Zero(9, 9)), DimensionError);
}

TEST_CASE("rotate_noise inverts back to W") {
    const auto split = random_split(12, 2, vec({2.0, 1.0}), 3);
    const Matrix w = sample_noise(12, 4);
    const auto c = rotate_noise(split, w);
    Matrix u(12, 12), v(12, 12);
    u << split.u1, split.u2;
    v << split.v1, split.v2;
    CHECK(max_norm(u * assemble_blocks(c) * v.transpose() - w) < 1e-12);
}

TEST_CASE("round trip property over many noise draws") {
    const auto split = random_split(9, 3, vec({4.0, 2.0, 1.0}), 17);
    Matrix u(9, 9), v(9, 9);
    u << split.u1, split.u2;
    v << split.v1, split.v2;
    for (int i = 0; i < 50; ++i) {
        const Matrix w = sample_noise(9, 600 + i);
        const auto c = rotate_noise(split, w);
        CAPTURE(i);
        CHECK(max_norm(u * assemble_blocks(c) * v.transpose() - w) < 1e-12);
    }
}

TEST_CASE("build_correctors degenerates to the identity") {
    const auto c = random_blocks(8, 2, 11);
    CBlocks zeros;
    zeros.c11 = Matrix::Zero(2, 2);
    zeros.c12 = Matrix::Zero(2, 6);
    zeros.c21 = Matrix::Zero(6, 2);
    zeros.c22 = Matrix::Zero(6, 6);

    const auto with_zero_blocks = build_correctors(zeros, vec({2.0, 1.0}), 0.3);
    CHECK(max_norm(with_zero_blocks.p - Matrix::Identity(8, 8)) == 0.0);
    CHECK(max_norm(with_zero_blocks.o - Matrix::Identity(8, 8)) == 0.0);

    const auto with_zero_eps = build_correctors(c, vec({2.0, 1.0}), 0.0);
    CHECK(max_norm(with_zero_eps.p - Matrix::Identity(8, 8)) == 0.0);
    CHECK(max_norm(with_zero_eps.o - Matrix::Identity(8, 8)) == 0.0);

    CHECK_THROWS_AS(build_correctors(c, vec({1.0, 1e-15}), 0.1), SingularSigma);
}

TEST_CASE("correctors reproduce their defining block formulas") {
    const auto c = random_blocks(9, 2, 13);
    const Vector sigma = vec({2.0, 1.0});
    const auto pair = build_correctors(c, sigma, 0.05);

    const Matrix si = sigma.cwiseInverse().asDiagonal();
    const Matrix si2 = si * si;
    const Matrix b_ref = -c.c22 * c.c12.transpose() * si2 + c.c21 * si * c.c11 * si;
    const Matrix d_ref = -si2 * c.c21.transpose() * c.c22 + si * c.c11 * si * c.c12;
    CHECK(max_norm(pair.b - b_ref) < 1e-12);
    CHECK(max_norm(pair.d - d_ref) < 1e-12);

    // Diagonal blocks of P - I and O - I are exactly zero.
    CHECK(max_norm((pair.p - Matrix::Identity(9, 9)).topLeftCorner(2, 2)) == 0.0);
    CHECK(max_norm((pair.p - Matrix::Identity(9, 9)).bottomRightCorner(7, 7)) == 0.0);
    CHECK(max_norm((pair.o - Matrix::Identity(9, 9)).topLeftCorner(2, 2)) == 0.0);
    CHECK(max_norm((pair.o - Matrix::Identity(9, 9)).bottomRightCorner(7, 7)) == 0.0);
}

TEST_CASE("corrector product pushes off-diagonal blocks to third order") {
    // Identity-basis instance: P^T (Sigma + eps C) O has off-diagonal blocks
    // of size O(eps^3); this seed keeps them under 10*eps^3.
    const int n = 6, k = 2;
    const auto c = random_blocks(n, k, 5);
    const Vector sigma = vec({2.0, 1.0});
    const double eps = 0.1;
    const auto pair = build_correctors(c, sigma, eps);

    Matrix big_sigma = Matrix::Zero(n, n);
    big_sigma.topLeftCorner(k, k) = Matrix(sigma.asDiagonal());
    const Matrix product =
        pair.p.transpose() * (big_sigma + eps * assemble_blocks(c)) * pair.o;
    const double off = std::max(max_norm(product.topRightCorner(k, n - k)),
                                max_norm(product.bottomLeftCorner(n - k, k)));
    CHECK(off <= 10.0 * eps * eps * eps);
}

TEST_CASE("off-diagonal residual scales as eps^3 across a decade") {
    const int n = 6, k = 2;
    const auto c = random_blocks(n, k, 29);
    const Vector sigma = vec({2.0, 1.0});
    Matrix big_sigma = Matrix::Zero(n, n);
    big_sigma.topLeftCorner(k, k) = Matrix(sigma.asDiagonal());

    double first_ratio = 0.0;
    double last_ratio = 0.0;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        const auto pair = build_correctors(c, sigma, eps);
        const Matrix product =
            pair.p.transpose() * (big_sigma + eps * assemble_blocks(c)) * pair.o;
        const double off = std::max(max_norm(product.topRightCorner(k, n - k)),
                                    max_norm(product.bottomLeftCorner(n - k, k)));
        const double ratio = off / (eps * eps * eps);
        if (first_ratio == 0.0) {
            first_ratio = ratio;
        }
        last_ratio = ratio;
    }
    CHECK(std::max(first_ratio, last_ratio) / std::min(first_ratio, last_ratio) < 2.0);
}

TEST_CASE("corrector orthogonality defect scales as eps^2") {
    const int n = 10, k = 2;
    const auto c = random_blocks(n, k, 37);
    const Vector sigma = vec({2.0, 1.0});

    double first_ratio = 0.0;
    double last_ratio = 0.0;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        const auto pair = build_correctors(c, sigma, eps);
        const Matrix defect = pair.p.transpose() * pair.p - Matrix::Identity(n, n);
        const double norm = Eigen::BDCSVD<Matrix>(defect).singularValues()(0);
        const double ratio = norm / (eps * eps);
        if (first_ratio == 0.0) {
            first_ratio = ratio;
        }
        last_ratio = ratio;
    }
    CHECK(std::max(first_ratio, last_ratio) / std::min(first_ratio, last_ratio) < 2.0);
}

TEST_CASE("first_order_bases equal the leading columns of U*P and V*O") {
    const auto split = random_split(11, 2, vec({2.0, 1.0}), 11);
    const Matrix w = sample_noise(11, 12);
    const auto c = rotate_noise(split, w);
    const double eps = 0.05;
    const auto pair = build_correctors(c, split.sigma1, eps);
    const auto [up1, vo1] = first_order_bases(split, c, pair, eps);

    Matrix u(11, 11), v(11, 11);
    u << split.u1, split.u2;
    v << split.v1, split.v2;
    CHECK(max_norm(up1 - (u * pair.p).leftCols(2)) < 1e-12);
    CHECK(max_norm(vo1 - (v * pair.o).leftCols(2)) < 1e-12);

    const auto at_zero = first_order_bases(split, c, build_correctors(c, split.sigma1, 0.0), 0.0);
    CHECK(max_norm(at_zero.first - split.u1) == 0.0);
    CHECK(max_norm(at_zero.second - split.v1) == 0.0);
}

TEST_CASE("gaussian predictor annihilates noise inside span(U1)") {
    const auto split = random_split(10, 2, vec({2.0, 1.0}), 13);
    // W with columns inside span(U1): U2^T W = 0.
    const Matrix w = split.u1 * gaussian_matrix(2, 10, 1.0, 14);
    CHECK(max_norm(gaussian_predictor(split, w)) < 1e-12);
}

TEST_CASE("gaussian predictor block structure in the identity basis") {
    Matrix y = Matrix::Zero(5, 5);
    y(0, 0) = 2.0;
    y(1, 1) = 1.0;
    const auto split = split_svd(y, 2);
    const Matrix w = gaussian_matrix(5, 5, 1.0, 15);
    const Matrix n_pred = gaussian_predictor(split, w);
    CHECK(max_norm(n_pred.topRows(2)) < 1e-12);
    const Matrix expected =
        w.bottomLeftCorner(3, 2) * split.sigma1.cwiseInverse().asDiagonal();
    CHECK(max_norm(n_pred.bottomRows(3) - expected) < 1e-12);
}

TEST_CASE("gaussian predictor columns stay orthogonal to U1") {
    const auto split = random_split(14, 3, vec({3.0, 2.0, 1.0}), 13);
    for (int i = 0; i < 10; ++i) {
        const Matrix w = sample_noise(14, 700 + i);
        const Matrix n_pred = gaussian_predictor(split, w);
        CAPTURE(i);
        CHECK(max_norm(split.u1.transpose() * n_pred) < 1e-12);
    }
}

TEST_CASE("procrustes recovers an exact common rotation") {
    const auto split = random_split(12, 3, vec({3.0, 2.0, 1.0}), 17);
    const auto ident = procrustes_rotation(split.u1, split.u1, split.v1, split.v1);
    CHECK(max_norm(ident.m - Matrix::Identity(3, 3)) < 1e-12);
    CHECK(ident.objective < 1e-12);
    CHECK_FALSE(ident.degenerate);

    const Matrix r = random_orthogonal(3, 18);
    const auto rot = procrustes_rotation(split.u1, split.u1 * r, split.v1, split.v1 * r);
    CHECK(max_norm(rot.m - r) < 1e-10);
    CHECK(rot.objective < 1e-10);
    CHECK(max_norm(rot.m.transpose() * rot.m - Matrix::Identity(3, 3)) < 1e-10);
}

TEST_CASE("procrustes beats random unitaries on a perturbed pair") {
    const auto split = random_split(10, 2, vec({2.0, 1.0}), 19);
    const Matrix w = sample_noise(10, 20);
    const double eps = 1e-3;
    const Matrix yt = split.reconstruct() + eps * w;
    const auto noisy = partition_svd(yt, 2);

    const auto best = procrustes_rotation(split.u1, noisy.u1, split.v1, noisy.v1);
    for (int i = 0; i < 100; ++i) {
        const Matrix r = random_orthogonal(2, 2100 + i);
        const double du = (split.u1 * r - noisy.u1).squaredNorm();
        const double dv = (split.v1 * r - noisy.v1).squaredNorm();
        CAPTURE(i);
        CHECK(best.objective <= std::sqrt(du + dv) + 1e-12);
    }
}

TEST_CASE("procrustes flags a degenerate cross matrix but stays unitary") {
    Matrix u1(2, 1), u1t(2, 1), v1(2, 1), v1t(2, 1);
    u1 << 1, 0;
    u1t << 0, 1;  // orthogonal to u1
    v1 << 0, 1;
    v1t << 1, 0;
    const auto rot = procrustes_rotation(u1, u1t, v1, v1t);
    CHECK(rot.degenerate);
    CHECK(std::abs(std::abs(rot.m(0, 0)) - 1.0) < 1e-12);
}

TEST_CASE("aligned residual on trivial and cancelling inputs") {
    const auto split = random_split(8, 2, vec({2.0, 1.0}), 23);
    const Matrix zero_n = Matrix::Zero(8, 2);
    const Matrix eye = Matrix::Identity(2, 2);

    const auto trivial = aligned_residual(split.u1, split.u1, eye, 0.1, zero_n);
    CHECK(trivial.resid_max == 0.0);
    CHECK(trivial.gauss_term_max == 0.0);

    const Matrix w = sample_noise(8, 24);
    const Matrix n_pred = gaussian_predictor(split, w);
    const double eps = 1e-3;
    const auto cancel = aligned_residual(split.u1, split.u1 + eps * n_pred, eye, eps, n_pred);
    CHECK(cancel.resid_max < 1e-14);
    CHECK(cancel.gauss_term_max > 0.0);
}

TEST_CASE("full trial residual is dominated by the gaussian term") {
    const auto split = random_split(40, 2, vec({2.0, 1.0}), 23);
    const Matrix w = sample_noise(40, 24);
    const double eps = 1e-3;
    const Matrix yt = split.reconstruct() + eps * w;
    const auto noisy = partition_svd(yt, 2);
    const auto c = rotate_noise(split, w);
    const auto fa = factor_alignment(split, c, eps, noisy.u1, noisy.v1);
    const Matrix n_pred = gaussian_predictor(split, w);
    const auto norms = aligned_residual(split.u1, noisy.u1, fa.m, eps, n_pred);
    CHECK(norms.resid_max < norms.gauss_term_max);
}

TEST_CASE("orthonormalize returns a positive-diagonal QR factorization") {
    const Matrix a = gaussian_matrix(9, 3, 1.0, 31);
    const auto f = orthonormalize(a);
    CHECK(max_norm(f.q.transpose() * f.q - Matrix::Identity(3, 3)) < 1e-12);
    CHECK(max_norm(f.q * f.r - a) < 1e-12);
    for (int j = 0; j < 3; ++j) {
        CHECK(f.r(j, j) > 0.0);
    }
}

TEST_CASE("orthonormalization distance obeys the triangular-perturbation bound") {
    // |Q - A|_2 <= (sqrt(2)+1) eta / (1 - eta) with eta = |A^T A - I|_F,
    // checked on near-orthonormal first-order bases.
    const auto split = random_split(20, 2, vec({2.0, 1.0}), 41);
    for (int i = 0; i < 20; ++i) {
        const Matrix w = sample_noise(20, 800 + i);
        const auto c = rotate_noise(split, w);
        const double eps = 0.02;
        const auto pair = build_correctors(c, split.sigma1, eps);
        const auto [up1, vo1] = first_order_bases(split, c, pair, eps);
        const double eta =
            (up1.transpose() * up1 - Matrix::Identity(2, 2)).norm();
        REQUIRE(eta < 0.5);
        const auto f = orthonormalize(up1);
        const double dist = Eigen::BDCSVD<Matrix>(f.q - up1).singularValues()(0);
        CAPTURE(i);
        CHECK(dist <= (std::sqrt(2.0) + 1.0) * eta / (1.0 - eta) + 1e-12);
    }
}

TEST_CASE("factor alignment tracks the noisy frame to second order") {
    const auto split = random_split(30, 2, vec({2.0, 1.0}), 47);
    const Matrix w = sample_noise(30, 48);

    double previous_resid = 0.0;
    for (double eps : {1e-2, 1e-3}) {
        const Matrix yt = split.reconstruct() + eps * w;
        const auto noisy = partition_svd(yt, 2);
        const auto c = rotate_noise(split, w);
        const auto fa = factor_alignment(split, c, eps, noisy.u1, noisy.v1);
        CHECK(max_norm(fa.m.transpose() * fa.m - Matrix::Identity(2, 2)) < 1e-10);
        const Matrix n_pred = gaussian_predictor(split, w);
        const auto norms = aligned_residual(split.u1, noisy.u1, fa.m, eps, n_pred);
        if (previous_resid > 0.0) {
            // One decade in eps drops the residual by about two decades.
            CHECK(previous_resid / norms.resid_max > 30.0);
            CHECK(previous_resid / norms.resid_max < 300.0);
        }
        previous_resid = norms.resid_max;
    }
}
