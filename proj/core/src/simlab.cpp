#include "mosumfm/simlab.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "mosumfm/errors.hpp"
#include "mosumfm/parallel.hpp"
#include "mosumfm/rng.hpp"

namespace mosumfm {

namespace {

// Draw-stream tags; each purpose gets its own derived stream so that one
// component's draws never shift another's.
enum StreamTag : std::uint64_t {
    kLoadings = 1,
    kFactorInnovations = 2,
    kIdioInnovations = 3,
    kFactorCovDiag = 4,
    kLoadingShifts = 5,
    kIdioCovBreaks = 6,
};

constexpr int kBurnIn = 200;

Eigen::MatrixXd draw_matrix_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sd) {
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = sd * rng.normal();
    }
    return out;
}

Eigen::MatrixXd draw_matrix_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo,
                                    double hi) {
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = rng.uniform(lo, hi);
    }
    return out;
}

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw NumericalError(std::string("covariance factorization failed for ") + what);
    }
    return llt.matrixL();
}

/// AR(1) path of length T with innovations sigma * L z_t, z iid N(0, I),
/// started at zero and burnt in. Returns a T x dim matrix (row = time).
Eigen::MatrixXd ar1_path(Rng& rng, int t_len, double rho, const Eigen::MatrixXd& innovation_chol) {
    const Eigen::Index dim = innovation_chol.rows();
    Eigen::VectorXd state = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd z(dim);
    Eigen::MatrixXd path(t_len, dim);
    for (int t = -kBurnIn; t < t_len; ++t) {
        for (Eigen::Index i = 0; i < dim; ++i) z[i] = rng.normal();
        state = rho * state + innovation_chol * z;
        if (t >= 0) path.row(t) = state;
    }
    return path;
}

/// Clamp eigenvalues at a small floor and rescale to unit diagonal; keeps a
/// perturbed correlation matrix usable as a covariance.
Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    Eigen::VectorXd evals = solver.eigenvalues().cwiseMax(1e-6);
    Eigen::MatrixXd fixed =
        solver.eigenvectors() * evals.asDiagonal() * solver.eigenvectors().transpose();
    const Eigen::VectorXd scale = fixed.diagonal().cwiseSqrt().cwiseInverse();
    return scale.asDiagonal() * fixed * scale.asDiagonal();
}

SimulatedPanel simulate_m1(const DgpSpec& spec) {
    const int t_len = spec.T;
    const int n = spec.N;
    constexpr int r0 = 5;
    const std::vector<int> breaks = {133, 267};
    const std::vector<int> idio_breaks = {100, 200, 300};

    Rng rng_cov(derive_seed(spec.seed, kFactorCovDiag));
    Rng rng_load(derive_seed(spec.seed, kLoadings));
    Rng rng_shift(derive_seed(spec.seed, kLoadingShifts));
    Rng rng_f(derive_seed(spec.seed, kFactorInnovations));
    Rng rng_e(derive_seed(spec.seed, kIdioInnovations));
    Rng rng_eb(derive_seed(spec.seed, kIdioCovBreaks));

    // Factor covariances: Sigma_0 = D Sigma_F D, then the pinned-entry variant.
    const Eigen::MatrixXd sigma_f = toeplitz_covariance(r0, 0.5);
    Eigen::VectorXd d_diag(r0);
    for (int i = 0; i < r0; ++i) d_diag[i] = rng_cov.uniform(0.5, 1.5);
    const Eigen::MatrixXd sigma0 = d_diag.asDiagonal() * sigma_f * d_diag.asDiagonal();
    Eigen::MatrixXd sigma1 = sigma0;
    sigma1(0, 1) = sigma1(1, 0) = 0.9 * std::sqrt(sigma0(0, 0) * sigma0(1, 1));
    sigma1(4, 4) = 1.3 * 1.3 * sigma0(4, 4);
    for (int i = 0; i < 4; ++i) {
        sigma1(i, 4) = sigma1(4, i) =
            std::pow(0.5, 4 - i) * std::sqrt(sigma0(i, i) * sigma0(4, 4));
    }

    // Loadings: segment 2 redraws the first two columns.
    Eigen::MatrixXd lambda0 = draw_matrix_uniform(rng_load, n, r0, -1.0, 1.0);
    Eigen::MatrixXd lambda2 = lambda0;
    lambda2.leftCols(2) = draw_matrix_uniform(rng_shift, n, 2, -1.0, 1.0);

    // Idiosyncratic covariances: Toeplitz base; at each nuisance break, 10%
    // of the pairwise correlations are redrawn within the Toeplitz envelope
    // (|rho_ij| <= 0.3^{|i-j|}) and the matrix is repaired to the nearest
    // unit-diagonal positive matrix. These breaks supply heteroscedasticity
    // only; they must stay too weak to be detected.
    std::vector<Eigen::MatrixXd> idio_chol;
    {
        Eigen::MatrixXd cov = toeplitz_covariance(n, 0.3);
        idio_chol.push_back(cholesky_factor(cov, "idiosyncratic base"));
        const auto n_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
        const auto n_redraw = static_cast<std::uint64_t>(0.1 * static_cast<double>(n_pairs));
        for (std::size_t b = 0; b < idio_breaks.size(); ++b) {
            for (std::uint64_t p = 0; p < n_redraw; ++p) {
                const auto i = static_cast<Eigen::Index>(rng_eb.bounded(n));
                auto j = static_cast<Eigen::Index>(rng_eb.bounded(n - 1));
                if (j >= i) ++j;
                const double bound = std::pow(0.3, std::abs(static_cast<int>(i - j)));
                const double rho = rng_eb.uniform(-bound, bound);
                cov(i, j) = cov(j, i) = rho;
            }
            cov = nearest_correlation(cov);
            idio_chol.push_back(cholesky_factor(cov, "idiosyncratic break"));
        }
    }

    const Eigen::MatrixXd chol0 = cholesky_factor(sigma0, "factor segment 0");
    const Eigen::MatrixXd chol1 = cholesky_factor(sigma1, "factor segment 1+");

    Eigen::MatrixXd factors(t_len, r0);
    Eigen::MatrixXd values(n, t_len);
    Eigen::VectorXd z_f(r0), z_e(n);
    const double idio_scale = std::sqrt(0.5);
    for (int t = 1; t <= t_len; ++t) {
        const Eigen::MatrixXd& fac_chol = (t <= breaks[0]) ? chol0 : chol1;
        const Eigen::MatrixXd& load = (t <= breaks[1]) ? lambda0 : lambda2;
        int idio_seg = 0;
        while (idio_seg < static_cast<int>(idio_breaks.size()) &&
               t > idio_breaks[static_cast<std::size_t>(idio_seg)]) {
            ++idio_seg;
        }
        for (int i = 0; i < r0; ++i) z_f[i] = rng_f.normal();
        for (int i = 0; i < n; ++i) z_e[i] = rng_e.normal();
        const Eigen::VectorXd f = fac_chol * z_f;
        factors.row(t - 1) = f;
        values.col(t - 1) =
            load * f + idio_scale * (idio_chol[static_cast<std::size_t>(idio_seg)] * z_e);
    }

    SimulatedPanel out;
    out.panel = make_panel(std::move(values));
    out.true_changepoints = breaks;
    out.segment_ranks = {r0, r0, r0};
    out.pseudo_factor_count = r0 + 2;
    out.factors = std::move(factors);
    out.notes =
        "idiosyncratic covariance breaks rendered as redrawing 10% of pairwise "
        "correlations at t in {100,200,300} with PSD repair";
    return out;
}

SimulatedPanel simulate_m2_m3(const DgpSpec& spec) {
    const bool null_model = spec.kind == DgpKind::M3;
    const int t_len = spec.T;
    const int n = spec.N;
    constexpr int r0 = 3;

    Rng rng_load(derive_seed(spec.seed, kLoadings));
    Rng rng_shift(derive_seed(spec.seed, kLoadingShifts));
    Rng rng_f(derive_seed(spec.seed, kFactorInnovations));
    Rng rng_e(derive_seed(spec.seed, kIdioInnovations));

    const Eigen::MatrixXd lambda0 =
        draw_matrix_normal(rng_load, n, r0, 1.0 / std::sqrt(static_cast<double>(r0)));

    std::vector<Eigen::MatrixXd> loadings{lambda0};
    std::vector<int> breaks;
    if (!null_model) {
        Eigen::MatrixXd c1 = Eigen::MatrixXd::Zero(r0, r0);
        c1(0, 0) = 0.5;
        c1(1, 1) = 1.0;
        c1(2, 2) = 1.5;
        c1(1, 0) = rng_shift.normal();
        c1(2, 0) = rng_shift.normal();
        c1(2, 1) = rng_shift.normal();
        Eigen::MatrixXd c2 = Eigen::MatrixXd::Zero(r0, r0);
        c2(0, 0) = 1.0;
        c2(1, 1) = 1.0;
        // Third break: emergence of new factors. The loading matrix is
        // redrawn independently, so the pooled pseudo-factor space grows
        // from 3 to 6 dimensions.
        const Eigen::MatrixXd lambda3 =
            draw_matrix_normal(rng_shift, n, r0, 1.0 / std::sqrt(static_cast<double>(r0)));
        loadings.push_back(lambda0 * c1);
        loadings.push_back(lambda0 * c2);
        loadings.push_back(lambda3);
        for (int j = 1; j <= 3; ++j) {
            breaks.push_back(static_cast<int>(static_cast<long long>(t_len) * j / 4));
        }
    }

    const Eigen::MatrixXd factor_chol = Eigen::MatrixXd::Identity(r0, r0);
    const Eigen::MatrixXd idio_chol =
        cholesky_factor(toeplitz_covariance(n, 0.3), "idiosyncratic Toeplitz");
    const Eigen::MatrixXd factors = ar1_path(rng_f, t_len, spec.rho_f, factor_chol);
    const Eigen::MatrixXd idio = ar1_path(rng_e, t_len, spec.rho_e, idio_chol);

    Eigen::MatrixXd values(n, t_len);
    for (int t = 1; t <= t_len; ++t) {
        std::size_t seg = 0;
        while (seg < breaks.size() && t > breaks[seg]) ++seg;
        values.col(t - 1) =
            loadings[seg] * factors.row(t - 1).transpose() + idio.row(t - 1).transpose();
    }

    SimulatedPanel out;
    out.panel = make_panel(std::move(values));
    out.true_changepoints = breaks;
    out.segment_ranks = null_model ? std::vector<int>{r0} : std::vector<int>{3, 3, 2, 3};
    out.pseudo_factor_count = null_model ? r0 : 2 * r0;
    out.factors = factors;
    return out;
}

}  // namespace

std::string to_string(DgpKind kind) {
    switch (kind) {
        case DgpKind::M1: return "M1";
        case DgpKind::M2: return "M2";
        case DgpKind::M3: return "M3";
    }
    return "M2";
}

DgpKind dgp_kind_from_string(const std::string& name) {
    if (name == "M1" || name == "m1") return DgpKind::M1;
    if (name == "M2" || name == "m2") return DgpKind::M2;
    if (name == "M3" || name == "m3") return DgpKind::M3;
    throw ValidationError("unknown scenario: " + name);
}

DgpSpec make_m1_spec(std::uint64_t seed) { return DgpSpec{DgpKind::M1, 400, 200, 0.0, 0.0, seed}; }

DgpSpec make_m2_spec(int T, int N, double rho_f, double rho_e, std::uint64_t seed) {
    return DgpSpec{DgpKind::M2, T, N, rho_f, rho_e, seed};
}

DgpSpec make_m3_spec(int T, int N, double rho_f, double rho_e, std::uint64_t seed) {
    return DgpSpec{DgpKind::M3, T, N, rho_f, rho_e, seed};
}

Eigen::MatrixXd toeplitz_covariance(int n, double rho) {
    Eigen::MatrixXd cov(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) cov(i, j) = std::pow(rho, std::abs(i - j));
    }
    return cov;
}

SimulatedPanel simulate(const DgpSpec& spec) {
    if (spec.kind == DgpKind::M1) {
        if (spec.T != 400 || spec.N != 200) {
            throw ValidationError("M1 is defined for T = 400, N = 200");
        }
        return simulate_m1(spec);
    }
    if (spec.T < 8) throw ValidationError("T must be >= 8");
    if (spec.N < 2) throw ValidationError("N must be >= 2");
    return simulate_m2_m3(spec);
}

EvalRecord evaluate(const ChangePointReport& report, const SimulatedPanel& truth) {
    EvalRecord record;
    const int r_true = static_cast<int>(truth.true_changepoints.size());
    record.r_diff = report.count() - r_true;
    if (record.r_diff <= -2) record.bucket = 0;
    else if (record.r_diff == -1) record.bucket = 1;
    else if (record.r_diff == 0) record.bucket = 2;
    else if (record.r_diff == 1) record.bucket = 3;
    else record.bucket = 4;

    const double radius = std::log(static_cast<double>(truth.panel.n_times()));
    record.hits.reserve(truth.true_changepoints.size());
    for (int k_true : truth.true_changepoints) {
        int hit = 0;
        for (const auto& estimate : report.estimates) {
            if (std::abs(estimate.location - k_true) <= radius) {
                hit = 1;
                break;
            }
        }
        record.hits.push_back(hit);
    }
    return record;
}

EvalSummary monte_carlo(const DgpSpec& spec, const DetectorConfig& config, int reps,
                        std::uint64_t seed, int threads) {
    if (reps < 1) throw ValidationError("reps must be >= 1");

    std::vector<EvalRecord> records(static_cast<std::size_t>(reps));
    parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t i) {
        DgpSpec replicate = spec;
        replicate.seed = derive_seed(seed, i);
        DetectorConfig replicate_config = config;
        replicate_config.seed = derive_seed(seed, i, 0x9e3779b9ULL);
        SimulatedPanel sim;
        try {
            sim = simulate(replicate);
            const PipelineResult result = run_pipeline(sim.panel, replicate_config);
            records[i] = evaluate(result.report, sim);
        } catch (const std::exception& err) {
            throw NumericalError("replicate " + std::to_string(i) + " (seed " +
                                 std::to_string(replicate.seed) + ") failed: " + err.what());
        }
    });

    EvalSummary summary;
    summary.replicates = reps;
    const std::size_t n_changes = records.front().hits.size();
    summary.accuracy.assign(n_changes, 0.0);
    for (const auto& record : records) {
        summary.buckets[static_cast<std::size_t>(record.bucket)] += 1.0;
        for (std::size_t j = 0; j < n_changes; ++j) {
            summary.accuracy[j] += record.hits[j];
        }
    }
    for (auto& b : summary.buckets) b /= reps;
    for (auto& a : summary.accuracy) a /= reps;
    return summary;
}

std::string EvalSummary::to_json_text() const {
    nlohmann::json j;
    j["buckets"] = {{"le_-2", buckets[0]},
                    {"-1", buckets[1]},
                    {"0", buckets[2]},
                    {"+1", buckets[3]},
                    {"ge_+2", buckets[4]}};
    j["accuracy"] = accuracy;
    j["replicates"] = replicates;
    return j.dump();
}

std::string EvalSummary::csv_header() {
    return "kind,T,N,rho_f,rho_e,mode,bucket_le_m2,bucket_m1,bucket_0,bucket_p1,bucket_ge2,"
           "acc_j1,acc_j2,acc_j3";
}

std::string EvalSummary::to_csv_row(const DgpSpec& spec, StandardizationMode mode) const {
    std::ostringstream out;
    out.precision(10);
    out << to_string(spec.kind) << ',' << spec.T << ',' << spec.N << ',' << spec.rho_f << ','
        << spec.rho_e << ',' << to_string(mode);
    for (double b : buckets) out << ',' << b;
    for (std::size_t j = 0; j < 3; ++j) {
        out << ',';
        if (j < accuracy.size()) out << accuracy[j];
    }
    return out.str();
}

}  // namespace mosumfm
