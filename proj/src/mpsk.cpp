#include "svperturb/mpsk.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "svperturb/rng.hpp"

namespace svp::mpsk {

namespace {

constexpr double kRadiusFloor = 1e-12;
constexpr int kIterationCap = 500;
constexpr double kConvergenceFrac = 1e-3;
constexpr double kMergeFrac = 0.5;

std::string fmt(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

bool valid_order(int m) { return m == 2 || m == 4 || m == 8 || m == 16 || m == 32; }

// cos(2 pi fcT l / L + phase) with the integer part of fcT*l reduced mod L
// exactly, so large carrier counts cannot drift.
double carrier_cos(long cycles, int l, int big_l, double phase) {
    const long r = ((cycles % big_l) * (l % big_l)) % big_l;
    return std::cos(2.0 * std::numbers::pi * static_cast<double>(r) / big_l + phase);
}

void sign_fix_columns(Matrix& u) {
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
        for (Eigen::Index i = 0; i < u.rows(); ++i) {
            if (u(i, j) != 0.0) {
                if (u(i, j) < 0.0) {
                    u.col(j) *= -1.0;
                }
                break;
            }
        }
    }
}

struct ModeSet {
    std::vector<Eigen::Vector2d> modes;

    int match(const Eigen::Vector2d& x, double tol) const {
        for (std::size_t j = 0; j < modes.size(); ++j) {
            if ((modes[j] - x).norm() < tol) {
                return static_cast<int>(j);
            }
        }
        return -1;
    }

    int nearest(const Eigen::Vector2d& x) const {
        int best = 0;
        double best_d = (modes[0] - x).norm();
        for (std::size_t j = 1; j < modes.size(); ++j) {
            const double d = (modes[j] - x).norm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(j);
            }
        }
        return best;
    }
};

ClusterResult cluster_trajectories(const Points2& finals, const std::vector<bool>& converged,
                                   double radius) {
    const Eigen::Index n = finals.cols();
    ModeSet set;
    std::vector<int> assignments(n, -1);

    for (Eigen::Index i = 0; i < n; ++i) {
        if (!converged[i]) {
            continue;
        }
        const Eigen::Vector2d x = finals.col(i);
        int j = set.match(x, radius * kMergeFrac);
        if (j < 0) {
            set.modes.push_back(x);
            j = static_cast<int>(set.modes.size()) - 1;
        }
        assignments[i] = j;
    }
    if (set.modes.empty()) {
        // Every trajectory hit the cap; fall back to the final positions.
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Vector2d x = finals.col(i);
            int j = set.match(x, radius * kMergeFrac);
            if (j < 0) {
                set.modes.push_back(x);
                j = static_cast<int>(set.modes.size()) - 1;
            }
            assignments[i] = j;
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (assignments[i] < 0) {
                assignments[i] = set.nearest(finals.col(i));
            }
        }
    }

    ClusterResult result;
    result.m_hat = static_cast<int>(set.modes.size());
    result.modes = Points2(2, set.modes.size());
    for (std::size_t j = 0; j < set.modes.size(); ++j) {
        result.modes.col(j) = set.modes[j];
    }
    result.assignments = std::move(assignments);
    result.radius_used = radius;
    return result;
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

long MpskScenario::carrier_cycles() const {
    const double fct = fc_hz * symbol_period_s;
    const double rounded = std::round(fct);
    if (std::abs(fct - rounded) > 1e-6 * std::max(1.0, std::abs(rounded))) {
        throw InvariantViolation("fc*T must be an integer number of carrier cycles");
    }
    return static_cast<long>(rounded);
}

void MpskScenario::validate() const {
    if (!valid_order(m_order)) {
        throw ConfigError("m_order: must be one of 2, 4, 8, 16, 32");
    }
    if (fc_hz <= 0.0 || symbol_period_s <= 0.0) {
        throw ConfigError("fc_hz, symbol_period_s: must be positive");
    }
    if (samples_per_symbol < 3) {
        throw ConfigError("samples_per_symbol: must be at least 3");
    }
    if (symbols < m_order) {
        throw ConfigError("symbols: must be at least m_order");
    }
    if (n0 < 0.0) {
        throw ConfigError("n0: must be nonnegative");
    }
    const long cycles = carrier_cycles();
    if (cycles % samples_per_symbol == 0) {
        throw InvariantViolation(
            "samples_per_symbol must not divide fc*T (carrier orthogonality)");
    }
}

double snr_db_to_n0(double snr_db) { return 0.5 * std::pow(10.0, -snr_db / 10.0); }

double n0_to_snr_db(double n0) {
    if (n0 <= 0.0) {
        throw ConfigError("n0: must be positive for an SNR value");
    }
    return 10.0 * std::log10(0.5 / n0);
}

double noise_stddev(double n0) { return std::sqrt(n0 / 2.0); }

std::vector<int> draw_symbol_phases(const MpskScenario& sc) {
    // m_order is a power of two, so masking engine output is exactly uniform.
    std::mt19937_64 engine(sc.seed);
    const std::uint64_t mask = static_cast<std::uint64_t>(sc.m_order) - 1;
    std::vector<int> indices(sc.symbols);
    for (auto& idx : indices) {
        idx = static_cast<int>(engine() & mask);
    }
    return indices;
}

Matrix noiseless_matrix(const MpskScenario& sc, const std::vector<int>& theta_indices) {
    const long cycles = sc.carrier_cycles();
    const int big_l = sc.samples_per_symbol;
    Matrix y(big_l, sc.symbols);
    for (int n = 0; n < sc.symbols; ++n) {
        const double theta =
            2.0 * std::numbers::pi * theta_indices[n] / sc.m_order + sc.theta_c;
        for (int l = 1; l <= big_l; ++l) {
            y(l - 1, n) = carrier_cos(cycles, l, big_l, theta);
        }
    }
    return y;
}

SynthResult synth_matrix(const MpskScenario& sc) {
    sc.validate();
    SynthResult result;
    result.theta_indices = draw_symbol_phases(sc);
    result.y = noiseless_matrix(sc, result.theta_indices);
    if (sc.n0 > 0.0) {
        GaussianStream noise(mix_seed(sc.seed, 0x6e6f6973));
        const double sd = noise_stddev(sc.n0);
        for (Eigen::Index i = 0; i < result.y.rows(); ++i) {
            for (Eigen::Index j = 0; j < result.y.cols(); ++j) {
                result.y(i, j) += sd * noise.next();
            }
        }
    }
    return result;
}

ReferenceFactors reference_factors(const MpskScenario& sc) {
    sc.validate();
    const long cycles = sc.carrier_cycles();
    const int big_l = sc.samples_per_symbol;
    const int n_sym = sc.symbols;
    const auto theta_indices = draw_symbol_phases(sc);

    ReferenceFactors f;
    f.u = Matrix(big_l, 2);
    for (int l = 1; l <= big_l; ++l) {
        for (int j = 0; j < 2; ++j) {
            f.u(l - 1, j) = std::sqrt(2.0 / big_l)
                            * carrier_cos(cycles, l, big_l, sc.theta_c - j * std::numbers::pi / 2);
        }
    }
    f.v = Matrix(n_sym, 2);
    for (int n = 0; n < n_sym; ++n) {
        const double theta = 2.0 * std::numbers::pi * theta_indices[n] / sc.m_order;
        for (int j = 0; j < 2; ++j) {
            f.v(n, j) = std::sqrt(2.0 / n_sym) * std::cos(theta + j * std::numbers::pi / 2);
        }
    }
    f.sigma = std::sqrt(static_cast<double>(big_l) * n_sym) / 2.0;
    return f;
}

Normalized normalize(const Matrix& y) {
    Normalized out;
    const double scale = std::sqrt(static_cast<double>(y.rows()) * y.cols());
    out.y_tilde = 2.0 * y / scale;
    out.eps_effective = 2.0 / std::sqrt(static_cast<double>(y.rows()));
    return out;
}

ConstellationEmbedding embed(const Matrix& y_tilde, double rank1_guard) {
    if (std::min(y_tilde.rows(), y_tilde.cols()) < 2) {
        throw DimensionError("embed: matrix needs at least two rows and columns");
    }
    Eigen::BDCSVD<Matrix> svd(y_tilde, Eigen::ComputeThinU);
    ConstellationEmbedding emb;
    emb.sigma1 = svd.singularValues()(0);
    emb.sigma2 = svd.singularValues()(1);
    if (emb.sigma1 <= 0.0) {
        throw DegenerateInput("embed: matrix is zero");
    }
    Matrix u1 = svd.matrixU().leftCols(2);
    sign_fix_columns(u1);
    emb.basis = u1;
    emb.points = u1.transpose() * y_tilde;
    emb.rank1 = emb.sigma2 / emb.sigma1 < rank1_guard;
    return emb;
}

double predicted_radius(double n0, int samples_per_symbol, int symbols) {
    if (n0 < 0.0) {
        throw ConfigError("n0: must be nonnegative");
    }
    if (samples_per_symbol < 1 || symbols <= 2) {
        throw DimensionError("predicted_radius: needs L >= 1 and N > 2");
    }
    const double ln = static_cast<double>(samples_per_symbol) * symbols;
    return 2.45 * std::sqrt(2.0 * n0 * (1.0 - 2.0 / symbols) / ln);
}

ClusterResult mean_shift(const Points2& points, double radius) {
    if (points.cols() < 1) {
        throw DimensionError("mean_shift: needs at least one point");
    }
    if (radius <= 0.0) {
        throw InvariantViolation("mean_shift: radius must be positive");
    }
    const Eigen::Index n = points.cols();
    const double inv_two_h2 = 1.0 / (2.0 * radius * radius);
    const double tol = radius * kConvergenceFrac;

    Points2 finals(2, n);
    std::vector<bool> converged(n, false);
    int nonconverged = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Vector2d x = points.col(i);
        for (int it = 0; it < kIterationCap; ++it) {
            Eigen::Vector2d acc = Eigen::Vector2d::Zero();
            double wsum = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const double d2 = (points.col(j) - x).squaredNorm();
                const double w = std::exp(-d2 * inv_two_h2);
                acc += w * points.col(j);
                wsum += w;
            }
            const Eigen::Vector2d next = acc / wsum;
            const double shift = (next - x).norm();
            x = next;
            if (shift < tol) {
                converged[i] = true;
                break;
            }
        }
        if (!converged[i]) {
            ++nonconverged;
        }
        finals.col(i) = x;
    }

    ClusterResult result = cluster_trajectories(finals, converged, radius);
    result.nonconverged = nonconverged;
    return result;
}

ClusterResult mean_shift_1d(const Vector& xs, double radius) {
    Points2 lifted(2, xs.size());
    lifted.row(0) = xs.transpose();
    lifted.row(1).setZero();
    return mean_shift(lifted, radius);
}

ClassifyResult classify(const Matrix& y_noisy, double n0, const ClassifyOptions& options) {
    const int big_l = static_cast<int>(y_noisy.rows());
    const int n_sym = static_cast<int>(y_noisy.cols());

    ClassifyResult result;
    const Normalized norm = normalize(y_noisy);
    result.embedding = embed(norm.y_tilde, options.rank1_guard);
    result.radius = predicted_radius(n0, big_l, n_sym);
    const double radius_used = std::max(result.radius, kRadiusFloor);

    if (result.embedding.rank1) {
        result.clusters = mean_shift_1d(result.embedding.points.row(0).transpose(), radius_used);
    } else {
        result.clusters = mean_shift(result.embedding.points, radius_used);
    }

    result.feasibility = bounds::feasibility(norm.eps_effective, n_sym, options.beta,
                                             std::sqrt(2.0 / big_l));
    result.min_feasible_l = bounds::min_samples_per_symbol(result.feasibility.threshold);

    result.m_hat = result.clusters.m_hat;
    if (options.snap_to_power_of_two) {
        int best = 2;
        for (int candidate : {2, 4, 8, 16, 32}) {
            if (std::abs(candidate - result.m_hat) < std::abs(best - result.m_hat)) {
                best = candidate;
            }
        }
        result.m_hat = best;
    }
    return result;
}

std::vector<SweepRow> snr_sweep(const MpskScenario& base, const std::vector<int>& m_orders,
                                const std::vector<double>& snr_db_grid, int runs_per_point,
                                int jobs) {
    if (m_orders.empty() || snr_db_grid.empty()) {
        throw ConfigError("snr_sweep: m_orders and snr_db_grid must be non-empty");
    }
    if (runs_per_point < 1) {
        throw ConfigError("runs_per_point: must be at least 1");
    }

    const int cells = static_cast<int>(m_orders.size() * snr_db_grid.size());
    std::vector<SweepRow> rows(cells);
    parallel_for(cells, jobs, [&](int cell) {
        const int mi = cell / static_cast<int>(snr_db_grid.size());
        const int si = cell % static_cast<int>(snr_db_grid.size());
        MpskScenario sc = base;
        sc.m_order = m_orders[mi];
        sc.n0 = snr_db_to_n0(snr_db_grid[si]);

        SweepRow row;
        row.m_order = sc.m_order;
        row.snr_db = snr_db_grid[si];
        row.runs = runs_per_point;
        for (int run = 0; run < runs_per_point; ++run) {
            sc.seed = mix_seed(base.seed, static_cast<std::uint64_t>(mi),
                               static_cast<std::uint64_t>(si), static_cast<std::uint64_t>(run));
            const SynthResult synth = synth_matrix(sc);
            const ClassifyResult res = classify(synth.y, sc.n0);
            row.successes += res.m_hat == sc.m_order ? 1 : 0;
        }
        row.rate = static_cast<double>(row.successes) / runs_per_point;
        rows[cell] = row;
    });
    return rows;
}

std::string points_csv(const ClassifyResult& result, const std::vector<int>& theta_indices) {
    std::string out = "x,y,true_theta_index,assigned_mode\n";
    const auto& pts = result.embedding.points;
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        out += fmt(pts(0, i));
        out += ',';
        out += fmt(pts(1, i));
        out += ',';
        out += theta_indices.empty() ? "-1" : std::to_string(theta_indices[i]);
        out += ',';
        out += std::to_string(result.clusters.assignments[i]);
        out += '\n';
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "M_order,snr_db,runs,successes,rate\n";
    for (const auto& r : rows) {
        out += std::to_string(r.m_order);
        out += ',';
        out += fmt(r.snr_db);
        out += ',';
        out += std::to_string(r.runs);
        out += ',';
        out += std::to_string(r.successes);
        out += ',';
        out += fmt(r.rate);
        out += '\n';
    }
    return out;
}

}  // namespace svp::mpsk
