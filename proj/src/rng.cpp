#include "svperturb/rng.hpp"

#include <cmath>
#include <numbers>

namespace svp {

namespace {

constexpr double kTwoPow53Inv = 0x1.0p-53;

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

double GaussianStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = static_cast<double>((engine_() >> 11) + 1) * kTwoPow53Inv;
    const double u2 = static_cast<double>(engine_() >> 11) * kTwoPow53Inv;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

void GaussianStream::fill(Matrix& m, double stddev) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = stddev * next();
        }
    }
}

Matrix GaussianStream::matrix(Eigen::Index rows, Eigen::Index cols, double stddev) {
    Matrix m(rows, cols);
    fill(m, stddev);
    return m;
}

Matrix sample_noise(int n, std::uint64_t seed) {
    if (n < 2) {
        throw DimensionError("sample_noise: n must be at least 2");
    }
    GaussianStream stream(seed);
    return stream.matrix(n, n, 1.0 / std::sqrt(static_cast<double>(n)));
}

Matrix gaussian_matrix(int rows, int cols, double stddev, std::uint64_t seed) {
    GaussianStream stream(seed);
    return stream.matrix(rows, cols, stddev);
}

Matrix random_orthogonal(int n, std::uint64_t seed) {
    GaussianStream stream(seed);
    const Matrix g = stream.matrix(n, n, 1.0);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) {
            q.col(j) *= -1.0;
        }
    }
    return q;
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t state = base;
    state ^= splitmix64(state) + a;
    state ^= splitmix64(state) + b;
    state ^= splitmix64(state) + c;
    return splitmix64(state);
}

}  // namespace svp
