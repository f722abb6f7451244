#pragma once

#include <cstdint>
#include <random>

#include "svperturb/types.hpp"

namespace svp {

/// Seeded Gaussian stream with a fixed, fully documented algorithm so a seed
/// produces the same values everywhere: std::mt19937_64 (bit-exact per the
/// standard) feeds Box-Muller on 53-bit uniforms. u1 lies in (0,1], u2 in
/// [0,1); each uniform consumes one engine output.
class GaussianStream {
  public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    double next();

    /// Fills row by row with N(0, stddev^2) entries.
    void fill(Matrix& m, double stddev);

    Matrix matrix(Eigen::Index rows, Eigen::Index cols, double stddev);

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// n x n matrix of i.i.d. N(0, 1/n) entries.
Matrix sample_noise(int n, std::uint64_t seed);

Matrix gaussian_matrix(int rows, int cols, double stddev, std::uint64_t seed);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, R-diagonal
/// signs folded into Q).
Matrix random_orthogonal(int n, std::uint64_t seed);

/// splitmix64-based combiner for deriving independent stream seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

}  // namespace svp
