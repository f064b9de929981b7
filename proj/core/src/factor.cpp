#include "mosumfm/factor.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "mosumfm/errors.hpp"
#include "mosumfm/rng.hpp"

namespace mosumfm {

namespace {

constexpr const char* kCriteria[3] = {"IC1", "IC2", "IC3"};

int median_of_three(int a, int b, int c) {
    std::array<int, 3> v{a, b, c};
    std::sort(v.begin(), v.end());
    return v[1];
}

/// Penalties from the cited information-criterion family; C2 = min(N, T).
std::array<double, 3> ic_penalties(double n, double t) {
    const double c2 = std::min(n, t);
    const double ratio = (n + t) / (n * t);
    return {ratio * std::log(n * t / (n + t)), ratio * std::log(c2), std::log(c2) / c2};
}

Panel subpanel(const Panel& panel, const std::vector<Eigen::Index>& series, Eigen::Index t_begin,
               Eigen::Index t_len) {
    Eigen::MatrixXd values(static_cast<Eigen::Index>(series.size()), t_len);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        values.row(i) = panel.values.row(series[static_cast<std::size_t>(i)]).segment(t_begin, t_len);
    }
    Panel out;
    out.values = std::move(values);
    out.demeaned = panel.demeaned;
    return out;
}

}  // namespace

Eigen::VectorXd gram_eigenvalues(const Eigen::MatrixXd& values) {
    const Eigen::Index n = values.rows();
    const Eigen::Index t = values.cols();
    Eigen::MatrixXd gram;
    if (n <= t) {
        gram = values * values.transpose();
    } else {
        gram = values.transpose() * values;
    }
    gram /= static_cast<double>(n) * static_cast<double>(t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigenvalue computation failed on the Gram matrix");
    }
    Eigen::VectorXd evals = solver.eigenvalues().reverse();
    for (Eigen::Index i = 0; i < evals.size(); ++i) evals[i] = std::max(evals[i], 0.0);
    return evals;
}

FactorEstimate estimate_factors(const Panel& panel, int r) {
    const Eigen::Index n = panel.n_series();
    const Eigen::Index t = panel.n_times();
    if (r < 1 || r > std::min(n, t)) {
        throw ValidationError("factor count r = " + std::to_string(r) +
                              " outside [1, min(N, T)] = [1, " +
                              std::to_string(std::min(n, t)) + "]");
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(panel.values, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv[0] <= 0.0) throw ValidationError("degenerate input: the panel is identically zero");
    if (sv[r - 1] <= 0.0) {
        throw ValidationError("requested r = " + std::to_string(r) +
                              " exceeds the numerical rank of the panel");
    }

    FactorEstimate fe;
    fe.r = r;
    fe.ghat = std::sqrt(static_cast<double>(t)) * svd.matrixV().leftCols(r);
    fe.phi = sv.head(r).array().square() / (static_cast<double>(n) * static_cast<double>(t));

    // Sign convention: largest-magnitude coordinate positive, first index on ties.
    for (int k = 0; k < r; ++k) {
        Eigen::Index arg = 0;
        double best = std::abs(fe.ghat(0, k));
        for (Eigen::Index i = 1; i < t; ++i) {
            const double mag = std::abs(fe.ghat(i, k));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        if (fe.ghat(arg, k) < 0.0) fe.ghat.col(k) = -fe.ghat.col(k);
    }
    fe.loadings = panel.values * fe.ghat / static_cast<double>(t);
    return fe;
}

FactorCountReport bai_ng_ic(const Panel& panel, int r_max) {
    const Eigen::Index n = panel.n_series();
    const Eigen::Index t = panel.n_times();
    const Eigen::Index min_nt = std::min(n, t);
    if (r_max < 1 || r_max > min_nt - 1) {
        throw ValidationError("r_max = " + std::to_string(r_max) + " must lie in [1, min(N,T)-1] = [1, " +
                              std::to_string(min_nt - 1) + "]");
    }

    const Eigen::VectorXd evals = gram_eigenvalues(panel.values);
    // V(r) = sum of eigenvalues beyond r == mean squared PCA residual;
    // accumulate from the tail so small terms are not swamped.
    std::vector<double> v_of_r(static_cast<std::size_t>(r_max) + 1, 0.0);
    {
        double tail = 0.0;
        std::vector<double> tails(static_cast<std::size_t>(evals.size()) + 1, 0.0);
        for (Eigen::Index i = evals.size() - 1; i >= 0; --i) {
            tail += evals[i];
            tails[static_cast<std::size_t>(i)] = tail;
        }
        for (int r = 0; r <= r_max; ++r) v_of_r[static_cast<std::size_t>(r)] = tails[static_cast<std::size_t>(r)];
    }

    // Rank-deficient panels have V(r) = 0 beyond the true rank up to rounding
    // noise in the spectrum; flooring V(r) relative to V(0) keeps log V(r)
    // finite and lets the penalty resolve the argmin to the smallest rank.
    const double v_floor = 1e-15 * v_of_r[0];
    for (auto& v : v_of_r) v = std::max(v, v_floor);

    const auto penalties = ic_penalties(static_cast<double>(n), static_cast<double>(t));
    FactorCountReport report;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> curve(static_cast<std::size_t>(r_max) + 1);
        int best_r = 1;
        double best_value = std::numeric_limits<double>::infinity();
        for (int r = 0; r <= r_max; ++r) {
            const double value = std::log(v_of_r[static_cast<std::size_t>(r)]) + r * penalties[static_cast<std::size_t>(c)];
            curve[static_cast<std::size_t>(r)] = value;
            if (r >= 1 && value < best_value) {
                best_value = value;
                best_r = r;
            }
        }
        report.per_criterion[kCriteria[c]] = best_r;
        report.ic_curves[kCriteria[c]] = std::move(curve);
    }
    report.r_hat = median_of_three(report.per_criterion["IC1"], report.per_criterion["IC2"],
                                   report.per_criterion["IC3"]);
    report.eigenvalues.assign(evals.data(),
                              evals.data() + std::min<Eigen::Index>(r_max + 1, evals.size()));
    return report;
}

FactorCountReport stable_factor_count(const Panel& panel, int r_max,
                                      const std::vector<double>& grid, int reps,
                                      std::uint64_t seed) {
    const Eigen::Index n = panel.n_series();
    const Eigen::Index t = panel.n_times();
    if (grid.empty()) throw ValidationError("subsample grid is empty");
    if (reps < 1) throw ValidationError("subsample reps must be >= 1");
    for (double kappa : grid) {
        if (!(kappa > 0.0 && kappa <= 1.0)) {
            throw ValidationError("subsample fractions must lie in (0, 1]");
        }
        const auto sub_n = static_cast<Eigen::Index>(std::floor(kappa * static_cast<double>(n)));
        const auto sub_t = static_cast<Eigen::Index>(std::floor(kappa * static_cast<double>(t)));
        if (sub_n < 2 || sub_t < 4) {
            throw ValidationError("fraction " + std::to_string(kappa) +
                                  " leaves fewer than 2 series or 4 time points");
        }
    }

    // kappa-weighted vote per criterion; ties resolve to the smaller r.
    std::array<std::vector<double>, 3> votes;
    for (auto& v : votes) v.assign(static_cast<std::size_t>(r_max) + 1, 0.0);

    std::vector<Eigen::Index> all_series(static_cast<std::size_t>(n));
    std::iota(all_series.begin(), all_series.end(), Eigen::Index{0});

    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const double kappa = grid[gi];
        const auto sub_n = static_cast<Eigen::Index>(std::floor(kappa * static_cast<double>(n)));
        const auto sub_t = static_cast<Eigen::Index>(std::floor(kappa * static_cast<double>(t)));
        for (int rep = 0; rep < reps; ++rep) {
            Rng rng(derive_seed(seed, gi, static_cast<std::uint64_t>(rep)));
            std::vector<Eigen::Index> pool = all_series;
            for (Eigen::Index i = 0; i < sub_n; ++i) {
                const auto j = i + static_cast<Eigen::Index>(rng.bounded(
                                       static_cast<std::uint64_t>(n - i)));
                std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
            }
            std::vector<Eigen::Index> chosen(pool.begin(), pool.begin() + sub_n);
            std::sort(chosen.begin(), chosen.end());
            const auto start = static_cast<Eigen::Index>(rng.bounded(
                static_cast<std::uint64_t>(t - sub_t + 1)));

            const Panel sub = subpanel(panel, chosen, start, sub_t);
            const int sub_r_max = std::min<int>(r_max, static_cast<int>(std::min(sub_n, sub_t)) - 1);
            const FactorCountReport sub_report = bai_ng_ic(sub, sub_r_max);
            for (int c = 0; c < 3; ++c) {
                votes[static_cast<std::size_t>(c)]
                     [static_cast<std::size_t>(sub_report.per_criterion.at(kCriteria[c]))] += kappa;
            }
        }
    }

    FactorCountReport report = bai_ng_ic(panel, r_max);  // curves/eigenvalues of the full panel
    for (int c = 0; c < 3; ++c) {
        int best_r = 1;
        double best_weight = -1.0;
        for (int r = 1; r <= r_max; ++r) {
            const double w = votes[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)];
            if (w > best_weight) {
                best_weight = w;
                best_r = r;
            }
        }
        report.per_criterion[kCriteria[c]] = best_r;
    }
    report.r_hat = median_of_three(report.per_criterion["IC1"], report.per_criterion["IC2"],
                                   report.per_criterion["IC3"]);
    return report;
}

FactorCountReport eigenvalue_ratio_count(const Panel& panel, int r_max) {
    const Eigen::Index min_nt = std::min(panel.n_series(), panel.n_times());
    if (r_max < 1 || r_max > min_nt - 1) {
        throw ValidationError("r_max = " + std::to_string(r_max) + " must lie in [1, min(N,T)-1] = [1, " +
                              std::to_string(min_nt - 1) + "]");
    }
    const Eigen::VectorXd evals = gram_eigenvalues(panel.values);

    FactorCountReport report;
    int best_k = 1;
    double best_ratio = -1.0;
    for (int k = 1; k <= r_max; ++k) {
        const double denom = evals[k];
        if (denom <= 0.0) {
            best_k = k;  // infinite ratio; nothing beyond can compete
            break;
        }
        const double ratio = evals[k - 1] / denom;
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best_k = k;
        }
    }
    report.r_hat = best_k;
    report.per_criterion["eigen_ratio"] = best_k;
    report.eigenvalues.assign(evals.data(),
                              evals.data() + std::min<Eigen::Index>(r_max + 1, evals.size()));
    return report;
}

std::string FactorCountReport::to_json_string() const {
    nlohmann::json j;
    j["r_hat"] = r_hat;
    j["per_criterion"] = per_criterion;
    j["ic_curves"] = ic_curves;
    j["eigenvalues"] = eigenvalues;
    return j.dump();
}

}  // namespace mosumfm
