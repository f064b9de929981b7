#include "mosumfm/mosum.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "mosumfm/errors.hpp"
#include "mosumfm/rng.hpp"

namespace mosumfm {

namespace {

constexpr double kEulerE = 2.718281828459045235360287;

/// Columns are vech(g_t g_t^T), minus vech(I_r) when centered.
Eigen::MatrixXd vech_outer_columns(const Eigen::MatrixXd& ghat, bool centered) {
    const Eigen::Index t_len = ghat.rows();
    const int r = static_cast<int>(ghat.cols());
    const Eigen::Index d = half_vec_dim(r);
    Eigen::MatrixXd z(d, t_len);
    Eigen::VectorXd g(r);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        g = ghat.row(t);
        vech_outer(g, z.col(t));
    }
    if (centered) {
        Eigen::Index idx = 0;
        for (int c = 0; c < r; ++c) {
            z.row(idx).array() -= 1.0;  // diagonal position (c, c)
            idx += r - c;
        }
    }
    return z;
}

double smallest_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

}  // namespace

std::string to_string(StandardizationMode mode) {
    return mode == StandardizationMode::Full ? "full" : "diagonal";
}

StandardizationMode standardization_mode_from_string(const std::string& name) {
    if (name == "full") return StandardizationMode::Full;
    if (name == "diagonal") return StandardizationMode::Diagonal;
    throw ValidationError("unknown standardization mode: " + name);
}

LongRunCov hac_long_run_cov(const FactorEstimate& fe, int m, StandardizationMode mode) {
    const Eigen::Index t_len = fe.ghat.rows();
    if (m < 0 || m > t_len - 2) {
        throw ValidationError("HAC bandwidth m = " + std::to_string(m) +
                              " must lie in [0, T-2]");
    }
    const Eigen::MatrixXd z = vech_outer_columns(fe.ghat, /*centered=*/true);
    const auto t_real = static_cast<double>(t_len);

    Eigen::MatrixXd v = z * z.transpose() / t_real;  // Gamma(0)
    for (int lag = 1; lag <= m; ++lag) {
        const Eigen::Index len = t_len - lag;
        const Eigen::MatrixXd gamma_l =
            z.rightCols(len) * z.leftCols(len).transpose() / t_real;
        const double weight = 1.0 - static_cast<double>(lag) / (m + 1);
        v += weight * (gamma_l + gamma_l.transpose());
    }
    v = ((v + v.transpose()) / 2.0).eval();

    const double min_diag = v.diagonal().minCoeff();
    if (min_diag <= 0.0) {
        throw NumericalError("long-run covariance has a non-positive diagonal entry (" +
                             std::to_string(min_diag) + ")");
    }

    if (mode == StandardizationMode::Diagonal) {
        const Eigen::VectorXd diag = v.diagonal();
        v.setZero();
        v.diagonal() = diag;
        return LongRunCov{std::move(v), mode, m};
    }

    // Full mode: require positive definiteness relative to the matrix scale,
    // allowing one ridge repair. A genuinely rank-deficient estimate stays at
    // the ridge level after conditioning and is rejected.
    const Eigen::Index d = v.rows();
    const double scale = v.trace() / static_cast<double>(d);
    const double floor = 1e-10 * scale;
    if (smallest_eigenvalue(v) <= floor) {
        v.diagonal().array() += floor;
        if (smallest_eigenvalue(v) <= floor * (1.0 + 1e-6)) {
            throw NumericalError(
                "long-run covariance is numerically singular even after conditioning; "
                "use diagonal standardization");
        }
    }
    return LongRunCov{std::move(v), mode, m};
}

MosumProfile mosum_profile(const FactorEstimate& fe, int gamma, const LongRunCov& lrcov) {
    const Eigen::Index t_len = fe.ghat.rows();
    const int r = fe.r;
    const Eigen::Index d = half_vec_dim(r);
    if (gamma < 1 || 2 * gamma > t_len) {
        throw ValidationError("bandwidth gamma = " + std::to_string(gamma) +
                              " must satisfy 2 <= 2*gamma <= T");
    }
    if (lrcov.dim() != d) {
        throw ValidationError("long-run covariance dimension " + std::to_string(lrcov.dim()) +
                              " does not match d = r(r+1)/2 = " + std::to_string(d));
    }

    // The centering by I_r cancels between the two equal-length windows, so
    // the raw outer products are summed directly.
    const Eigen::MatrixXd z = vech_outer_columns(fe.ghat, /*centered=*/false);

    Eigen::LLT<Eigen::MatrixXd> chol;
    Eigen::VectorXd inv_diag;
    if (lrcov.mode == StandardizationMode::Full) {
        chol.compute(lrcov.matrix);
        if (chol.info() != Eigen::Success) {
            throw NumericalError("Cholesky factorization of the long-run covariance failed");
        }
    } else {
        inv_diag = lrcov.matrix.diagonal().cwiseInverse();
    }

    MosumProfile profile;
    profile.gamma = gamma;
    profile.T = static_cast<int>(t_len);
    profile.r = r;
    profile.d = static_cast<int>(d);
    const Eigen::Index n_stats = t_len - 2 * gamma + 1;
    profile.stats.resize(static_cast<std::size_t>(n_stats));
    profile.raw.resize(d, n_stats);

    const double scale = 1.0 / std::sqrt(2.0 * gamma);
    // Window sums over time indices (1-based): left (k-gamma, k], right (k, k+gamma].
    Eigen::VectorXd left = z.leftCols(gamma).rowwise().sum();
    Eigen::VectorXd right = z.middleCols(gamma, gamma).rowwise().sum();
    Eigen::VectorXd m_vec(d), solved(d);
    for (Eigen::Index i = 0; i < n_stats; ++i) {
        const Eigen::Index k = gamma + i;
        m_vec = scale * (right - left);
        profile.raw.col(i) = m_vec;
        double quad;
        if (lrcov.mode == StandardizationMode::Full) {
            solved = chol.solve(m_vec);
            quad = m_vec.dot(solved);
        } else {
            quad = m_vec.cwiseAbs2().dot(inv_diag);
        }
        profile.stats[static_cast<std::size_t>(i)] = std::sqrt(std::max(quad, 0.0));
        if (k < t_len - gamma) {
            left += z.col(k) - z.col(k - gamma);
            right += z.col(k + gamma) - z.col(k);
        }
    }
    return profile;
}

double gumbel_a(double x) { return std::sqrt(2.0 * std::log(x)); }

double gumbel_b(double x, int d) {
    return 2.0 * std::log(x) + 0.5 * d * std::log(std::log(x)) + std::log(0.5) -
           std::lgamma(0.5 * d);
}

double threshold_gumbel(int T, int gamma, int d, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    const double x = static_cast<double>(T) / gamma;
    if (x <= kEulerE) {
        throw ValidationError("T/gamma = " + std::to_string(x) +
                              " must exceed e; choose a smaller gamma");
    }
    const double tail = std::log(std::log(1.0 / std::sqrt(1.0 - alpha)));
    return (gumbel_b(x, d) - tail) / gumbel_a(x);
}

double asymptotic_pvalue(double max_stat, int T, int gamma, int d) {
    const double x_ratio = static_cast<double>(T) / gamma;
    if (x_ratio <= kEulerE) {
        throw ValidationError("T/gamma must exceed e for the asymptotic p-value");
    }
    const double x = gumbel_a(x_ratio) * max_stat - gumbel_b(x_ratio, d);
    return 1.0 - std::exp(-2.0 * std::exp(-x));
}

ChangePointReport detect_changes(const MosumProfile& profile, double eta, double threshold) {
    if (profile.stats.empty()) throw ValidationError("empty profile");
    if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("eta must lie in (0, 1]");

    const auto n = static_cast<Eigen::Index>(profile.stats.size());
    const auto window = static_cast<Eigen::Index>(std::floor(eta * profile.gamma + 1e-9));

    ChangePointReport report;
    report.threshold = threshold;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double value = profile.stats[static_cast<std::size_t>(i)];
        if (!(value > threshold)) continue;
        const Eigen::Index lo = std::max<Eigen::Index>(0, i - window);
        const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + window);
        bool is_max = true;
        for (Eigen::Index j = lo; j <= hi && is_max; ++j) {
            if (profile.stats[static_cast<std::size_t>(j)] > value) is_max = false;
        }
        if (!is_max) continue;
        report.estimates.push_back(
            {profile.gamma + static_cast<int>(i), value,
             std::numeric_limits<double>::quiet_NaN()});
        // Skip the rest of a flat plateau; only its smallest k is reported.
        while (i + 1 < n &&
               profile.stats[static_cast<std::size_t>(i + 1)] == value) {
            ++i;
        }
    }
    return report;
}

std::vector<int> ChangePointReport::locations() const {
    std::vector<int> out;
    out.reserve(estimates.size());
    for (const auto& e : estimates) out.push_back(e.location);
    return out;
}

GammaChoice default_gamma(int T, int N, double varrho) {
    if (T < 8 || N < 2) throw ValidationError("default_gamma requires T >= 8 and N >= 2");
    GammaChoice choice;
    choice.zeta = std::max(0.4, 1.0 - std::log(static_cast<double>(N)) /
                                    std::log(static_cast<double>(T)));
    const double log_pow = std::pow(std::log(static_cast<double>(T)), varrho);
    choice.primary_value = static_cast<long long>(
        std::floor(std::pow(static_cast<double>(T), 2.0 * choice.zeta) * log_pow));
    const long long cap = T / 2 - 1;
    const long long fallback_raw = static_cast<long long>(
        std::floor(std::pow(static_cast<double>(T), choice.zeta) * log_pow));
    choice.fallback_value = std::max(1LL, std::min(fallback_raw, cap));
    if (choice.primary_value <= cap && choice.primary_value >= 1) {
        choice.gamma = static_cast<int>(choice.primary_value);
        choice.used_fallback = false;
    } else {
        choice.gamma = static_cast<int>(choice.fallback_value);
        choice.used_fallback = true;
    }
    return choice;
}

std::string to_string(DetectorConfig::RStrategy strategy) {
    switch (strategy) {
        case DetectorConfig::RStrategy::Fixed: return "fixed";
        case DetectorConfig::RStrategy::IcStable: return "ic-stable";
        case DetectorConfig::RStrategy::EigenRatio: return "eigen-ratio";
    }
    return "fixed";
}

DetectorConfig::RStrategy r_strategy_from_string(const std::string& name) {
    if (name == "fixed") return DetectorConfig::RStrategy::Fixed;
    if (name == "ic-stable") return DetectorConfig::RStrategy::IcStable;
    if (name == "eigen-ratio") return DetectorConfig::RStrategy::EigenRatio;
    throw ValidationError("unknown r strategy: " + name);
}

PipelineResult run_pipeline(const Panel& panel, const DetectorConfig& config) {
    const int t_len = static_cast<int>(panel.n_times());
    const int n_series = static_cast<int>(panel.n_series());

    PipelineResult result;
    int gamma;
    if (config.gamma) {
        gamma = *config.gamma;
        if (gamma < 1 || 2 * gamma > t_len) {
            throw ValidationError("explicit gamma = " + std::to_string(gamma) +
                                  " must satisfy 2 <= 2*gamma <= T");
        }
    } else {
        result.gamma_choice = default_gamma(t_len, n_series, config.varrho);
        gamma = result.gamma_choice.gamma;
    }

    int r;
    switch (config.r_strategy) {
        case DetectorConfig::RStrategy::Fixed:
            r = config.r;
            break;
        case DetectorConfig::RStrategy::IcStable:
            r = stable_factor_count(panel, config.r_max, config.subsample_grid,
                                    config.subsample_reps, config.seed)
                    .r_hat;
            break;
        case DetectorConfig::RStrategy::EigenRatio:
            r = eigenvalue_ratio_count(panel, config.r_max).r_hat;
            break;
        default:
            throw ValidationError("invalid r strategy");
    }
    if (r < 1) throw ValidationError("resolved factor count r must be >= 1");

    const int m = config.m ? *config.m
                           : static_cast<int>(std::floor(std::pow(static_cast<double>(t_len), 0.25)));
    const int d = static_cast<int>(half_vec_dim(r));

    result.factors = estimate_factors(panel, r);
    result.lrcov = hac_long_run_cov(result.factors, m, config.mode);
    result.profile = mosum_profile(result.factors, gamma, result.lrcov);

    const double base = threshold_gumbel(t_len, gamma, d, config.alpha);
    const double inflation =
        std::pow(std::max(1.0, std::log(static_cast<double>(t_len) / gamma)), config.kappa);
    const double threshold = base * inflation;

    result.profile.threshold = threshold;
    result.profile.alpha = config.alpha;
    result.profile.kappa = config.kappa;
    result.profile.eta = config.eta;

    result.report = detect_changes(result.profile, config.eta, threshold);
    for (auto& est : result.report.estimates) {
        est.p_value = asymptotic_pvalue(est.statistic, t_len, gamma, d);
    }

    result.settings = ResolvedSettings{r,           gamma,        m,
                                       config.alpha, config.eta,  config.kappa,
                                       config.varrho, config.mode, to_string(config.r_strategy)};
    result.report.settings = result.settings;
    return result;
}

std::string profile_to_csv(const MosumProfile& profile) {
    std::ostringstream out;
    out.precision(17);
    out << "k,stat,threshold\n";
    for (std::size_t i = 0; i < profile.stats.size(); ++i) {
        out << (profile.gamma + static_cast<int>(i)) << ',' << profile.stats[i] << ','
            << profile.threshold << '\n';
    }
    return out.str();
}

namespace {

nlohmann::json settings_json(const ResolvedSettings& s) {
    nlohmann::json j;
    j["r"] = s.r;
    j["gamma"] = s.gamma;
    j["m"] = s.m;
    j["alpha"] = s.alpha;
    j["eta"] = s.eta;
    j["kappa"] = s.kappa;
    j["varrho"] = s.varrho;
    j["mode"] = to_string(s.mode);
    j["r_strategy"] = s.r_strategy;
    return j;
}

}  // namespace

std::string ChangePointReport::to_json_string() const {
    nlohmann::json j;
    j["count"] = count();
    j["threshold"] = threshold;
    j["settings"] = settings_json(settings);
    auto& list = j["estimates"] = nlohmann::json::array();
    for (const auto& e : estimates) {
        nlohmann::json item;
        item["k"] = e.location;
        item["statistic"] = e.statistic;
        item["p_value"] = e.p_value;
        list.push_back(std::move(item));
    }
    return j.dump();
}

DetectorConfig DetectorConfig::from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    DetectorConfig config;
    if (j.contains("r_strategy")) config.r_strategy = r_strategy_from_string(j["r_strategy"]);
    if (j.contains("r")) config.r = j["r"];
    if (j.contains("r_max")) config.r_max = j["r_max"];
    if (j.contains("gamma") && !j["gamma"].is_null()) config.gamma = j["gamma"].get<int>();
    if (j.contains("varrho")) config.varrho = j["varrho"];
    if (j.contains("m") && !j["m"].is_null()) config.m = j["m"].get<int>();
    if (j.contains("alpha")) config.alpha = j["alpha"];
    if (j.contains("eta")) config.eta = j["eta"];
    if (j.contains("kappa")) config.kappa = j["kappa"];
    if (j.contains("mode")) config.mode = standardization_mode_from_string(j["mode"]);
    if (j.contains("subsample_grid")) {
        config.subsample_grid = j["subsample_grid"].get<std::vector<double>>();
    }
    if (j.contains("subsample_reps")) config.subsample_reps = j["subsample_reps"];
    if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
    return config;
}

std::string DetectorConfig::to_json_text() const {
    nlohmann::json j;
    j["r_strategy"] = to_string(r_strategy);
    j["r"] = r;
    j["r_max"] = r_max;
    if (gamma) j["gamma"] = *gamma; else j["gamma"] = nullptr;
    j["varrho"] = varrho;
    if (m) j["m"] = *m; else j["m"] = nullptr;
    j["alpha"] = alpha;
    j["eta"] = eta;
    j["kappa"] = kappa;
    j["mode"] = to_string(mode);
    j["subsample_grid"] = subsample_grid;
    j["subsample_reps"] = subsample_reps;
    j["seed"] = seed;
    return j.dump();
}

}  // namespace mosumfm
